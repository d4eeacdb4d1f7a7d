#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cutoff {

// A deck is listed bottom to top; deck[pos] is the card (0-based face value)
// at height pos. The sorted deck {0, 1, ..., n-1} has card 0 at the bottom.
using Deck = std::vector<std::uint8_t>;

std::uint64_t factorial(unsigned n);

// Lexicographic (Lehmer-code) rank in [0, n!); the sorted deck has rank 0.
std::uint64_t lehmer_rank(std::span<const std::uint8_t> deck);
Deck lehmer_unrank(std::uint64_t rank, unsigned n);

// Largest j such that cards 1..j (face values) sit at increasing heights.
unsigned rising_sequence_length(std::span<const std::uint8_t> deck);

// Top-in-at-random move: the top card is reinserted so that it ends up at
// height `slot` (0 = bottom, n-1 = back on top).
void insert_top_card(Deck& deck, unsigned slot);

}  // namespace cutoff
