import numpy as np
import pytest

from dmcam.crossbar import Crossbar, monte_carlo
from dmcam.device import VariationParams, conduct


PAPER_SIGMAS = VariationParams(sigma_vth=0.054, sigma_r_rel=0.08, seed=3)


def _distances(dm, stored, query):
    table = np.asarray(dm.entries)
    return table[np.asarray(query)[None, :], np.asarray(stored)].sum(axis=1)


def test_golden_encoding_realized_through_device_model(golden_encoding, hamming_dm):
    # single-symbol cells, one stored row per symbol: every (search, store)
    # pair must reproduce its matrix entry as an exact unit multiple
    cb = Crossbar(golden_encoding, [[0], [1], [2], [3]])
    for s in range(4):
        units = np.asarray(cb.search([s]).row_currents) / cb.unit_current
        assert list(units) == list(hamming_dm.row(s))


def test_search_identity_row_has_zero_current(hamming_compiled):
    cb = Crossbar(hamming_compiled.encoding, [[1, 2, 3, 0]])
    result = cb.search([1, 2, 3, 0])
    assert result.row_currents[0] == 0.0
    assert result.winner == 0


def test_single_cell_distance_two(hamming_compiled):
    cb = Crossbar(hamming_compiled.encoding, [[3]])
    result = cb.search([0])
    assert result.row_currents[0] / cb.unit_current == 2.0


def test_program_last_write_wins(hamming_compiled):
    cb = Crossbar(hamming_compiled.encoding, [[0, 0], [3, 3]])
    cb.program(0, [2, 2])
    cb.program(0, [1, 0])
    assert list(cb.stored[0]) == [1, 0]
    # distance from query (1, 0) is now zero
    assert cb.search([1, 0]).row_currents[0] == 0.0


@pytest.mark.parametrize(
    "compiled_fixture",
    ["hamming_compiled", "manhattan_compiled", "sq_euclid_compiled"],
)
@pytest.mark.parametrize("dims", [1, 2, 3, 4])
def test_zero_variation_exactness_exhaustive(compiled_fixture, dims, request):
    """Row current over unit current equals the integer software distance,
    for every (stored vector, query vector) pair of the given width."""
    compiled = request.getfixturevalue(compiled_fixture)
    rng = np.random.default_rng(dims)
    # all stored vectors exhaustively; queries exhaustive up to dims 3,
    # sampled at dims 4 (additivity covers the rest)
    symbols = compiled.dm.m
    stored = np.array(np.meshgrid(*[range(symbols)] * dims)).T.reshape(-1, dims)
    cb = Crossbar(compiled.encoding, stored)
    if dims <= 3:
        queries = stored
    else:
        queries = rng.integers(0, symbols, (40, dims))
    table = np.asarray(compiled.dm.entries)
    for q in queries:
        units = np.asarray(cb.search(q).row_currents) / cb.unit_current
        expected = table[q[None, :], stored].sum(axis=1)
        assert np.array_equal(units, expected.astype(float))


def test_additivity_of_row_currents(hamming_compiled):
    rng = np.random.default_rng(11)
    stored = rng.integers(0, 4, (5, 6))
    query = rng.integers(0, 4, 6)
    full = np.asarray(Crossbar(hamming_compiled.encoding, stored).search(query).row_currents)
    parts = np.zeros_like(full)
    for d in range(6):
        cb = Crossbar(hamming_compiled.encoding, stored[:, [d]])
        parts += np.asarray(cb.search([query[d]]).row_currents)
    assert np.allclose(full, parts, rtol=0, atol=0)


def test_winner_invariant_under_common_scaling(hamming_compiled):
    rng = np.random.default_rng(12)
    stored = rng.integers(0, 4, (6, 8))
    query = rng.integers(0, 4, 8)
    currents = np.asarray(Crossbar(hamming_compiled.encoding, stored).search(query).row_currents)
    assert int(np.argmin(currents)) == int(np.argmin(currents * 3.5))


def test_tie_breaks_to_lowest_index(hamming_compiled):
    cb = Crossbar(hamming_compiled.encoding, [[2, 2], [2, 2], [2, 2]])
    assert cb.search([0, 0]).winner == 0


def test_knn_full_ordering_matches_software(hamming_compiled, hamming_dm):
    rng = np.random.default_rng(13)
    stored = rng.integers(0, 4, (8, 10))
    query = rng.integers(0, 4, 10)
    cb = Crossbar(hamming_compiled.encoding, stored)
    order = cb.knn(query, 8)
    dists = _distances(hamming_dm, stored, query)
    assert order == tuple(sorted(range(8), key=lambda r: (dists[r], r)))
    assert cb.knn(query, 1)[0] == cb.search(query).winner


def test_knn_rejects_bad_count(hamming_compiled):
    cb = Crossbar(hamming_compiled.encoding, [[0], [1]])
    with pytest.raises(ValueError):
        cb.knn([0], 3)
    with pytest.raises(ValueError):
        cb.knn([0], 0)


def test_query_validation(hamming_compiled):
    cb = Crossbar(hamming_compiled.encoding, [[0, 1]])
    with pytest.raises(ValueError):
        cb.search([0])
    with pytest.raises(ValueError):
        cb.search([0, 4])
    with pytest.raises(ValueError):
        cb.program(0, [0, 9])
    with pytest.raises(ValueError):
        cb.program(5, [0, 0])


def test_masking(hamming_compiled):
    cb = Crossbar(hamming_compiled.encoding, [[0, 0], [0, 1]])
    result = cb.search([0, 0], masked=[0])
    assert result.winner == 1
    assert result.masked == frozenset({0})
    with pytest.raises(ValueError):
        cb.search([0, 0], masked=[0, 1])


def test_row_currents_match_scalar_device_model(hamming_compiled):
    rng = np.random.default_rng(21)
    stored = rng.integers(0, 4, (3, 5))
    cb = Crossbar(hamming_compiled.encoding, stored, variation=PAPER_SIGMAS)
    query = rng.integers(0, 4, 5)
    enc = hamming_compiled.encoding
    ladder = cb.ladder
    currents = np.asarray(cb.search(query).row_currents)
    for row in range(3):
        total = 0.0
        for dim in range(5):
            sym = int(query[dim])
            for br in range(enc.k):
                vgs = ladder.vgs_volts(enc.vgs_ranks[sym][br])
                vds = ladder.vds_volts(enc.vds_multiples[sym][br])
                total += conduct(vgs, vds, cb.device_state(row, dim, br))
        assert currents[row] == pytest.approx(total, rel=1e-12)


def test_variation_determinism(hamming_compiled):
    stored = [[0, 1, 2], [3, 2, 1]]
    a = Crossbar(hamming_compiled.encoding, stored, variation=PAPER_SIGMAS)
    b = Crossbar(hamming_compiled.encoding, stored, variation=PAPER_SIGMAS)
    q = [1, 1, 1]
    assert a.search(q) == b.search(q)


def test_state_json_round_trip(hamming_compiled):
    stored = [[0, 1], [2, 3]]
    cb = Crossbar(hamming_compiled.encoding, stored, variation=PAPER_SIGMAS)
    clone = Crossbar.from_state_json(cb.to_state_json())
    q = [2, 0]
    assert clone.search(q) == cb.search(q)


def test_lta_noise_hook_is_deterministic(hamming_compiled):
    stored = [[0, 0], [1, 1]]
    a = Crossbar(hamming_compiled.encoding, stored, variation=VariationParams(seed=5),
                 lta_noise_sigma=1e-9)
    b = Crossbar(hamming_compiled.encoding, stored, variation=VariationParams(seed=5),
                 lta_noise_sigma=1e-9)
    qa, qb = a.search([0, 1]), b.search([0, 1])
    assert qa == qb
    clean = Crossbar(hamming_compiled.encoding, stored)
    assert np.any(np.asarray(qa.row_currents) != np.asarray(clean.search([0, 1]).row_currents))


# -- Monte Carlo ---------------------------------------------------------------


def test_mc_zero_sigma_perfect_accuracy(hamming_compiled):
    stored = [[0, 0, 0], [3, 3, 3]]
    queries = [[0, 0, 0], [3, 3, 3]]
    result = monte_carlo(
        hamming_compiled.encoding, stored, queries, [0, 1],
        VariationParams(0.0, 0.0, seed=1), runs=5,
    )
    assert result.accuracy == 1.0


def test_mc_determinism_and_workers(hamming_compiled):
    stored = [[1, 1, 1, 1, 0], [1, 1, 1, 1, 1], [3, 3, 3, 0, 0]]
    queries = [[0, 0, 0, 0, 0]]
    kwargs = dict(
        encoding=hamming_compiled.encoding,
        stored=stored,
        queries=queries,
        expected_winners=[0],
        params=VariationParams(0.12, 0.08, seed=42),
        runs=50,
    )
    a = monte_carlo(**kwargs)
    b = monte_carlo(**kwargs)
    c = monte_carlo(**kwargs, workers=4)
    assert a.winners == b.winners == c.winners
    assert a.accuracy == b.accuracy == c.accuracy


def test_mc_csv_layout(hamming_compiled):
    result = monte_carlo(
        hamming_compiled.encoding, [[0], [3]], [[0]], [0],
        VariationParams(0.0, 0.0, seed=0), runs=2,
    )
    lines = result.to_csv().splitlines()
    assert lines[0] == "run,query,winner,expected,correct"
    assert lines[1] == "0,0,0,0,1"
    assert len(lines) == 3


def test_mc_validation(hamming_compiled):
    with pytest.raises(ValueError):
        monte_carlo(hamming_compiled.encoding, [[0]], [[0]], [0, 1],
                    VariationParams(0, 0, 0), runs=1)
    with pytest.raises(ValueError):
        monte_carlo(hamming_compiled.encoding, [[0]], [[0]], [0],
                    VariationParams(0, 0, 0), runs=0)
