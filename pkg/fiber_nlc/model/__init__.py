"""Domain types, symbol mapping and pulse shaping."""
