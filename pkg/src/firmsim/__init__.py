"""Grid simulator of firm-division demography and proximity-driven relocation."""
