import numpy as np
import pytest

from compbench.attributes import Quadruple, Scene, source_from_classes


def make_source(t=0, p=0, r=0, a=7):
    return source_from_classes(t, p, r, a)


def make_scene(scene_id, class_rows):
    """Scene from a list of (t, p, r, a) class tuples."""
    return Scene(id=scene_id, sources=tuple(source_from_classes(*row) for row in class_rows))


def make_quad(quad_id, a_rows, c_rows, t_rows):
    """Materialize a structurally valid quadruple plus its four scenes."""
    t_sources = tuple(source_from_classes(*row) for row in t_rows)
    a = make_scene(f"{quad_id}a", a_rows)
    c = make_scene(f"{quad_id}c", c_rows)
    b = Scene(id=f"{quad_id}b", sources=a.sources + t_sources)
    d = Scene(id=f"{quad_id}d", sources=c.sources + t_sources)
    quad = Quadruple(id=quad_id, a_id=a.id, b_id=b.id, c_id=c.id, d_id=d.id,
                     t_sources=t_sources)
    scenes = {s.id: s for s in (a, b, c, d)}
    return quad, scenes


def random_scene(rng, scene_id, n_min=1, n_max=4):
    n = int(rng.integers(n_min, n_max + 1))
    rows = [tuple(int(v) for v in rng.integers(0, 8, size=4)) for _ in range(n)]
    return make_scene(scene_id, rows)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
