import json

import numpy as np
import numpy.testing as npt
import pytest

from gebo_package.errors import BadBounds, BadCardinality, DuplicateName, EmptySpace, InvalidConfiguration
from gebo_package.space import (
    Configuration,
    MixedSpace,
    continuous,
    discrete,
    encode_features,
    feature_blocks,
    flat_features,
    load_space,
    sample_uniform,
    validate,
)


def make_space():
    return MixedSpace((discrete("d0", 3), discrete("d1", 3), continuous("c0", -1, 1), continuous("c1", -1, 1)))


def test_validate_accepts_mixed_space():
    validate(make_space())


@pytest.mark.parametrize(
    "variables, error",
    [
        ((continuous("a", 0, 1),), EmptySpace),
        ((continuous("a", 0, 0), discrete("b", 2)), BadBounds),
        ((continuous("a", 0, float("inf")), discrete("b", 2)), BadBounds),
        ((discrete("a", 1), discrete("b", 2)), BadCardinality),
        ((discrete("a", 2), continuous("a", 0, 1)), DuplicateName),
    ],
)
def test_validate_rejects(variables, error):
    with pytest.raises(error):
        validate(MixedSpace(variables))


def test_encode_features_one_hot_and_unit_scale():
    space = MixedSpace((discrete("d", 3), continuous("c", 10, 20)))

    # Executa a função
    feats = encode_features(Configuration((1, 15.0)), space)

    npt.assert_array_equal(feats[0], [0.0, 1.0, 0.0])
    npt.assert_allclose(feats[1], [0.5])
    npt.assert_allclose(encode_features(Configuration((0, 10.0)), space)[1], [0.0])


@pytest.mark.parametrize("values", [(3, 15.0), (0, 25.0), (0.5, 15.0), (0,)])
def test_encode_features_rejects_invalid_configuration(values):
    space = MixedSpace((discrete("d", 3), continuous("c", 10, 20)))
    with pytest.raises(InvalidConfiguration):
        encode_features(Configuration(values), space)


def test_encode_features_is_monotone_in_continuous_values():
    space = MixedSpace((discrete("d", 2), continuous("c", -5, 5)))
    encoded = [encode_features(Configuration((0, v)), space)[1][0] for v in np.linspace(-5, 5, 11)]
    assert np.all(np.diff(encoded) > 0)


def test_feature_blocks_follow_variable_order():
    space = make_space()
    configs = [Configuration((2, 0, 1.0, -1.0)), Configuration((0, 1, 0.0, 0.0))]

    blocks = feature_blocks(configs, space)

    assert [b.shape for b in blocks] == [(2, 3), (2, 3), (2, 1), (2, 1)]
    assert flat_features(configs, space).shape == (2, space.flat_size)
    npt.assert_array_equal(blocks[0][0], [0, 0, 1])
    npt.assert_allclose(blocks[3][:, 0], [0.0, 0.5])


def test_sample_uniform_is_deterministic_per_seed():
    space = make_space()
    a = sample_uniform(space, np.random.default_rng(11))
    b = sample_uniform(space, np.random.default_rng(11))
    assert a == b


def test_sample_uniform_frequencies():
    space = MixedSpace((discrete("d", 2), continuous("c", 0, 1)))
    rng = np.random.default_rng(0)
    draws = np.array([sample_uniform(space, rng).values for _ in range(10_000)])

    assert 0.45 <= np.mean(draws[:, 0] == 1) <= 0.55
    assert 0.47 <= draws[:, 1].mean() <= 0.53


def test_load_space_reads_declaration_file(tmp_path):
    path = tmp_path / "space.json"
    path.write_text(json.dumps({"variables": [
        {"name": "fuel", "kind": "discrete", "cardinality": 5},
        {"name": "radius", "kind": "continuous", "bounds": [10.0, 200.0]},
    ]}))

    space = load_space(path)

    assert space.names == ["fuel", "radius"]
    assert space.index_of("radius") == 1
    assert space.feature_sizes == [5, 1]
    assert space.to_dict()["variables"][1]["bounds"] == [10.0, 200.0]


def test_configuration_serialization():
    cfg = Configuration((2, 57.3))
    assert cfg.to_dict() == {"values": [2, 57.3]}
    assert Configuration.from_dict({"values": [2, 57.3]}) == cfg
