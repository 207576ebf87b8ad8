import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from oracles import is_8_connected
from scribblebench import geometry, phantom
from scribblebench.scribble_gen import (
    BORDER,
    INTERIOR,
    ScribbleConfig,
    ScribbleGenerator,
    ScribbleRng,
    _interior,
    border_scribble,
    check_scribble_correctness,
    generate_slice,
    generate_volume,
    interior_scribble,
    order_nearest_neighbor,
    smooth_offsets,
)
from scribblebench.volume_io import LabelVolume

CFG = ScribbleConfig()


def _stream(kind=INTERIOR, seed=0):
    return ScribbleRng(seed, "case").stream(3, 1, kind)


@pytest.mark.parametrize("fn", [interior_scribble, border_scribble])
def test_empty_mask(fn):
    assert not fn(np.zeros((10, 10), dtype=bool), CFG, _stream()).any()


@pytest.mark.parametrize("fn", [interior_scribble, border_scribble])
def test_below_min_component(fn):
    m = np.zeros((10, 10), dtype=bool)
    m[2:4, 2:4] = True
    assert not fn(m, CFG, _stream()).any()


def test_single_pixel_border_is_empty():
    m = np.zeros((5, 5), dtype=bool)
    m[2, 2] = True
    assert not border_scribble(m, CFG.replace(min_component_pixels=1), _stream(BORDER)).any()


def test_interior_on_disk(disk21):
    s = interior_scribble(disk21, CFG, _stream())
    assert s.any() and is_8_connected(np.argwhere(s))
    assert not np.any(s & ~disk21)
    assert s.sum() < 0.25 * disk21.sum()
    assert np.array_equal(s, interior_scribble(disk21, CFG, _stream()))


def test_border_on_disk(disk21):
    s = border_scribble(disk21, CFG, _stream(BORDER))
    assert s.any() and not np.any(s & ~disk21)
    dist = geometry.distance_to_boundary(disk21)
    assert np.all(dist[s] <= CFG.offset_scale + 1.5)
    assert np.array_equal(s, border_scribble(disk21, CFG, _stream(BORDER)))


@pytest.mark.parametrize("seed", range(20))
def test_interior_depth_on_convex_region(disk21, seed):
    stroke, radius = _interior(disk21, CFG, ScribbleRng(seed, "d").stream(0, 1, INTERIOR))
    assert radius == CFG.erosion_radii()[0]
    # the curve stays in the hull of eroded pixels; rounding moves it by at most sqrt(2)/2
    assert np.all(geometry.inside_distance(disk21)[stroke] > radius - np.sqrt(0.5))


def test_erosion_fallback_on_thin_strip():
    m = np.zeros((12, 30), dtype=bool)
    m[5:7, 2:28] = True
    stroke, radius = _interior(m, CFG, _stream())
    assert radius == 0.0 and stroke.any() and not np.any(stroke & ~m)


def test_nearest_neighbor_order():
    pts = np.array([[0, 0], [10, 0], [1, 0], [5, 0]], dtype=float)
    assert order_nearest_neighbor(pts, 0).tolist() == [[0, 0], [1, 0], [5, 0], [10, 0]]


def test_smooth_offsets_range():
    rng = np.random.default_rng(0)
    off = smooth_offsets(40, CFG, rng)
    assert off.shape == (40,) and np.all(off >= 0) and np.all(off <= CFG.offset_scale)


def test_rng_streams():
    a = ScribbleRng(7, "vol").stream(1, 2, INTERIOR).random(4)
    assert np.array_equal(a, ScribbleRng(7, "vol").stream(1, 2, INTERIOR).random(4))
    for other in (ScribbleRng(8, "vol").stream(1, 2, INTERIOR), ScribbleRng(7, "vol2").stream(1, 2, INTERIOR),
                  ScribbleRng(7, "vol").stream(0, 2, INTERIOR), ScribbleRng(7, "vol").stream(1, 3, INTERIOR),
                  ScribbleRng(7, "vol").stream(1, 2, BORDER)):
        assert not np.array_equal(a, other.random(4))


def _three_class_slice():
    yy, xx = np.indices((40, 40))
    d = np.zeros((40, 40), dtype=np.uint8)
    d[(yy - 14) ** 2 + (xx - 14) ** 2 <= 64] = 1
    d[25:36, 20:38] = 2
    return d


def test_slice_only_background():
    out = generate_slice(np.zeros((20, 20), dtype=np.uint8), [0], CFG, ScribbleRng(0, "x"))
    assert set(np.unique(out).tolist()) == {0, 255}


def test_slice_agreement_and_background_flag():
    d = _three_class_slice()
    out = generate_slice(d, [0, 1, 2], CFG, ScribbleRng(0, "x"))
    labeled = out != 255
    assert np.all(out[labeled] == d[labeled])
    assert set(np.unique(out[labeled]).tolist()) == {0, 1, 2}
    no_bg = generate_slice(d, [0, 1, 2], CFG.replace(include_background=False), ScribbleRng(0, "x"))
    assert not np.any(no_bg == 0)


def _phantom():
    return phantom.render(phantom.default_spec())


def test_volume_all_background_without_background_class():
    v = LabelVolume(np.zeros((8, 8, 4), dtype=np.uint8))
    s = generate_volume(v, CFG.replace(include_background=False))
    assert np.all(s.data == 255)


def test_volume_determinism_and_metadata():
    v = _phantom()
    a, b = generate_volume(v, CFG, "c"), generate_volume(v, CFG, "c")
    assert a.data.tobytes() == b.data.tobytes()
    assert a.same_grid(v) and np.array_equal(a.affine, v.affine)
    assert check_scribble_correctness(a, v) == 0


def test_volume_both_types_on_every_large_cross_section():
    v = _phantom()
    rng = ScribbleRng(CFG.master_seed, "c")
    for k in range(v.dims[2]):
        mask = v.data[:, :, k] == 1
        if geometry.connected_components(mask)[1].max(initial=0) < CFG.min_component_pixels:
            continue
        assert interior_scribble(mask, CFG, rng.stream(k, 1, INTERIOR)).any()
        assert border_scribble(mask, CFG, rng.stream(k, 1, BORDER)).any()


def test_slice_order_independence():
    v = _phantom()
    full = generate_volume(v, CFG, "c")
    rng = ScribbleRng(CFG.master_seed, "c")
    classes = v.class_ids()
    for k in reversed(range(v.dims[2])):
        plane = generate_slice(v.data[:, :, k], classes, CFG, rng, slice_index=k)
        assert np.array_equal(plane, full.data[:, :, k])


def test_slice_axis_respected():
    v = _phantom()
    s = generate_volume(v, CFG.replace(slice_axis=0), "c")
    assert check_scribble_correctness(s, v) == 0
    assert s.data.tobytes() != generate_volume(v, CFG, "c").data.tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        ScribbleConfig(erosion_fallbacks=(2, 1))
    with pytest.raises(ValueError):
        ScribbleConfig(arc_fraction=(0.0, 0.2))
    with pytest.raises(ValueError):
        ScribbleConfig(control_points=(8, 4))
    with pytest.raises(ValueError):
        ScribbleConfig(slice_axis=3)


def test_config_yaml_round_trip(tmp_path):
    cfg = CFG.replace(master_seed=123, arc_fraction=(0.2, 0.3), include_background=False)
    cfg.dump(tmp_path / "c.yaml")
    assert ScribbleConfig.load(tmp_path / "c.yaml") == cfg


def test_config_unknown_key(tmp_path):
    (tmp_path / "c.yaml").write_text("erosion_radiuss: 3\n")
    with pytest.raises(ValueError, match="erosion_radiuss"):
        ScribbleConfig.load(tmp_path / "c.yaml")


def test_estimator_params_and_clone():
    est = ScribbleGenerator(master_seed=5, offset_scale=1.0)
    assert est.get_params()["master_seed"] == 5
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert ScribbleGenerator.from_config(CFG).get_params() == ScribbleGenerator().get_params()


def test_estimator_fit_transform():
    v = _phantom()
    est = ScribbleGenerator(master_seed=3)
    single = est.fit_transform(v)
    assert est.classes_.tolist() == [0, 1, 2]
    assert single.data.tobytes() == generate_volume(v, CFG.replace(master_seed=3), "").data.tobytes()
    many = est.transform([v, v], volume_ids=["a", "b"])
    assert len(many) == 2 and all(check_scribble_correctness(s, v) == 0 for s in many)


def test_estimator_requires_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        ScribbleGenerator().transform(_phantom())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 2))
def test_correctness_on_random_slices(seed, blobs):
    rng = np.random.default_rng(seed)
    d = np.zeros((30, 30), dtype=np.uint8)
    yy, xx = np.indices(d.shape)
    for c in range(1, blobs + 2):
        cy, cx, r = rng.uniform(5, 25), rng.uniform(5, 25), rng.uniform(2, 9)
        d[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = c
    out = generate_slice(d, np.unique(d).tolist(), CFG.replace(master_seed=seed), ScribbleRng(seed, "h"))
    labeled = out != 255
    assert np.all(out[labeled] == d[labeled])
