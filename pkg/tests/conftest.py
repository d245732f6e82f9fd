import numpy as np
import pytest

from registra import compose, from_similarity
from registra.demo import make_demo_recipe, make_demo_scene


@pytest.fixture(scope="session")
def demo_scene():
    return make_demo_scene()


@pytest.fixture(scope="session")
def demo_recipe(demo_scene):
    return make_demo_recipe(demo_scene)


def center_warp(theta, scale, tx, ty, cx=320.0, cy=240.0):
    """Similarity that rotates/scales about (cx, cy) then translates.

    Keeps the demo scene's features inside the frame for moderate
    rotations, unlike an origin-pivot warp.
    """
    pivot = compose(
        from_similarity(cx, cy, 0, 1),
        compose(from_similarity(0, 0, theta, scale), from_similarity(-cx, -cy, 0, 1)),
    )
    return compose(from_similarity(tx, ty, 0, 1), pivot)


def random_small_warp(rng: np.random.Generator):
    """A warp well inside the default search ranges and the scene margins."""
    return center_warp(
        rng.uniform(-8.0, 8.0),
        rng.uniform(0.94, 1.06),
        rng.uniform(-12.0, 12.0),
        rng.uniform(-12.0, 12.0),
    )
