#include "cutoff/permutation.hpp"

#include <algorithm>

#include "cutoff/error.hpp"

namespace cutoff {

std::uint64_t factorial(unsigned n) {
  require(n <= 20, ErrorCode::Capacity, "factorial overflows 64 bits above 20");
  std::uint64_t f = 1;
  for (unsigned i = 2; i <= n; ++i) f *= i;
  return f;
}

std::uint64_t lehmer_rank(std::span<const std::uint8_t> deck) {
  const unsigned n = unsigned(deck.size());
  std::uint64_t rank = 0;
  for (unsigned i = 0; i < n; ++i) {
    unsigned smaller_after = 0;
    for (unsigned j = i + 1; j < n; ++j)
      if (deck[j] < deck[i]) ++smaller_after;
    rank += smaller_after * factorial(n - 1 - i);
  }
  return rank;
}

Deck lehmer_unrank(std::uint64_t rank, unsigned n) {
  std::vector<std::uint8_t> pool(n);
  for (unsigned i = 0; i < n; ++i) pool[i] = std::uint8_t(i);
  Deck deck;
  deck.reserve(n);
  for (unsigned i = 0; i < n; ++i) {
    const std::uint64_t f = factorial(n - 1 - i);
    const std::uint64_t digit = rank / f;
    rank %= f;
    deck.push_back(pool[digit]);
    pool.erase(pool.begin() + std::ptrdiff_t(digit));
  }
  return deck;
}

unsigned rising_sequence_length(std::span<const std::uint8_t> deck) {
  const unsigned n = unsigned(deck.size());
  if (n == 0) return 0;
  std::vector<unsigned> height(n);
  for (unsigned pos = 0; pos < n; ++pos) height[deck[pos]] = pos;
  unsigned len = 1;
  while (len < n && height[len] > height[len - 1]) ++len;
  return len;
}

void insert_top_card(Deck& deck, unsigned slot) {
  const std::uint8_t card = deck.back();
  deck.pop_back();
  deck.insert(deck.begin() + slot, card);
}

}  // namespace cutoff
