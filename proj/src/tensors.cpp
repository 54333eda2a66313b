#include "vtv/tensors.hpp"

namespace vtv {

int tv_channel_index(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kTvChannelNames.size(); ++i) {
    if (kTvChannelNames[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace vtv
