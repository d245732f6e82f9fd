"""Process-wide instrumentation backing the no-warp / no-copy contract.

The measurement path must never resample the inspected image or duplicate
its pixel buffer; the only permitted full-image allocation is the explicit
overlay render.  These counters make that claim checkable: the synthetic
warper and the overlay renderer bump them, nothing on the inspection path
does, and the test suite asserts the deltas.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class Counters:
    warp_calls: int = 0       # full-image resamples (test-support warper only)
    pixel_copies: int = 0     # pixels duplicated out of an existing image
    overlay_renders: int = 0  # explicit RGB overlay allocations (permitted)

    def snapshot(self) -> tuple[int, int, int]:
        return (self.warp_calls, self.pixel_copies, self.overlay_renders)


counters = Counters()


def reset() -> None:
    counters.warp_calls = 0
    counters.pixel_copies = 0
    counters.overlay_renders = 0
