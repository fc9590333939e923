"""Control signals, plants and the two scenario objectives."""
