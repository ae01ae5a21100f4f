#include "ttt/recall.hpp"

namespace ttt {

const char* rule_name(UpdateRule rule) {
  switch (rule) {
    case UpdateRule::kGd: return "gd";
    case UpdateRule::kMomentum: return "momentum";
    case UpdateRule::kMuon: return "muon";
  }
  return "?";
}

UpdateRule rule_from_name(const std::string& name) {
  if (name == "gd") return UpdateRule::kGd;
  if (name == "momentum") return UpdateRule::kMomentum;
  if (name == "muon") return UpdateRule::kMuon;
  throw ConfigError("unknown optimizer rule: " + name);
}

}  // namespace ttt
