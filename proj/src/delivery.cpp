#include "cgkasim/delivery.hpp"

#include "cgkasim/codec.hpp"
#include "cgkasim/errors.hpp"

#include <sodium.h>

namespace cgkasim {

std::string
group_topic(const std::string& group_id)
{
  return "group/" + group_id;
}

std::string
welcome_topic(const std::string& user_id)
{
  return "welcome/" + user_id;
}

Bytes
compute_message_id(const std::string& sender,
                   uint64_t sequence,
                   const Bytes& payload)
{
  Writer w;
  w.bytes(payload);
  w.str(sender);
  w.u64(sequence);
  Bytes id(secret_size);
  crypto_generichash(id.data(), id.size(), w.out().data(), w.out().size(), nullptr, 0);
  return id;
}

size_t
pick_winner(WinnerRule rule, const std::vector<Envelope>& candidates)
{
  if (candidates.empty()) {
    throw InvalidParameterError("winner selection requires at least one candidate");
  }
  if (rule == WinnerRule::first_delivered) {
    return 0;
  }
  size_t best = 0;
  for (size_t i = 1; i < candidates.size(); i++) {
    if (bytes_less(candidates[i].message_id, candidates[best].message_id)) {
      best = i;
    }
  }
  return best;
}

} // namespace cgkasim
