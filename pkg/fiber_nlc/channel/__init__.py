"""Split-step fiber channel with lumped amplification."""
