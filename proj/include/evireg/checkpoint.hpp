#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "evireg/mlp.hpp"
#include "evireg/model.hpp"

namespace evireg {

inline constexpr int kCheckpointVersion = 1;

/// Raised for unreadable or malformed checkpoint files. `field()` names the
/// offending JSON path, e.g. "layers[1].b[3]".
class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(std::string field, const std::string& message);
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct Checkpoint {
  Model model;
  AdamState adam;
};

/// Serializes to the versioned JSON checkpoint document. Doubles are written
/// with shortest round-trip formatting, so load(save(x)) is bit-exact.
[[nodiscard]] std::string checkpoint_to_string(const Checkpoint& ckpt);
[[nodiscard]] Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace evireg
