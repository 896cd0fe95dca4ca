#ifndef QSR_SERIALIZE_HPP
#define QSR_SERIALIZE_HPP

#include <json.hpp>

#include "qsr/psf.hpp"
#include "qsr/scene.hpp"

namespace qsr {

void to_json(nlohmann::json& j, const PsfSpec& s);
void from_json(const nlohmann::json& j, PsfSpec& s);

void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);

}  // namespace qsr

#endif
