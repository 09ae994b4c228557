"""porosim: worker-parallel multiphase porous-media flow simulator."""

from ._core import (
    DeckError,
    connected_components,
    deck_summary,
    run,
    serialize_round_trip,
    validate_deck,
)

__all__ = [
    "DeckError",
    "connected_components",
    "deck_summary",
    "run",
    "serialize_round_trip",
    "validate_deck",
]
