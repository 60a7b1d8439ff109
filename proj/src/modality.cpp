#include "sdt/modality.hpp"

#include "sdt/errors.hpp"

namespace sdt {

Modality parse_modality(std::string_view s) {
    if (s == "t" || s == "text") return Modality::Text;
    if (s == "a" || s == "audio") return Modality::Audio;
    if (s == "v" || s == "visual") return Modality::Visual;
    throw ConfigError("unknown modality '" + std::string(s) + "'");
}

ModalitySet ModalitySet::parse(std::string_view s) {
    ModalitySet set;
    for (char c : s) {
        if (c == '+' || c == ',' || c == ' ') continue;
        set.insert(parse_modality(std::string_view(&c, 1)));
    }
    if (set.empty()) throw ConfigError("modality set must not be empty");
    return set;
}

std::string ModalitySet::str() const {
    std::string s;
    for_each([&](Modality m) { s.push_back(tag_of(m)); });
    return s;
}

}  // namespace sdt
