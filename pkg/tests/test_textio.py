import numpy as np
import pytest

from twostep_sls.clsyn import LqrWeights
from twostep_sls.implsyn import ImplementationMatrices
from twostep_sls.lti import FirTransferMatrix
from twostep_sls.sparsity import chain_topology, delay_mask
from twostep_sls.textio import (format_fir, format_matrix, load_clmaps, load_implementation,
                                load_mask, load_system, load_weights, parse_blocks,
                                save_clmaps, save_implementation, save_mask, save_system,
                                save_weights)

from conftest import random_clmaps


def test_matrix_and_fir_format():
    assert format_matrix([[1.0, 2.5], [0.0, -3.0]]) == "2 2\n1 2.5\n0 -3\n"
    X = FirTransferMatrix(np.arange(4.0).reshape(2, 1, 2), 1)
    assert format_fir(X) == "1 2 1 2\n0 1\n2 3\n"


def test_parse_skips_comments_and_blank_lines():
    text = "# header\n\n1 2\n3 4\n# fir\n1 1 0 1\n5\n6\n"
    M, X = parse_blocks(text)
    np.testing.assert_array_equal(M, [[3.0, 4.0]])
    assert X.start == 0 and X.horizon == 1
    np.testing.assert_array_equal(X.coeffs.ravel(), [5.0, 6.0])


@pytest.mark.parametrize("text", ["1 2\n1\n", "2 2\n1 2\n", "1\n1\n", "1 1 2 1\n1\n", "a b\n"])
def test_parse_errors(text):
    with pytest.raises(ValueError):
        parse_blocks(text)


def test_round_trips_are_exact(tmp_path, rng):
    sys, cl = random_clmaps(rng, 3, 2)
    save_system(tmp_path / "s.txt", sys)
    save_clmaps(tmp_path / "c.txt", cl)
    s2, c2 = load_system(tmp_path / "s.txt"), load_clmaps(tmp_path / "c.txt")
    np.testing.assert_array_equal(s2.A, sys.A)
    np.testing.assert_array_equal(s2.B, sys.B)
    np.testing.assert_array_equal(c2.phi_x.coeffs, cl.phi_x.coeffs)
    np.testing.assert_array_equal(c2.phi_u.coeffs, cl.phi_u.coeffs)

    impl = ImplementationMatrices.from_clmaps(cl)
    save_implementation(tmp_path / "i.txt", impl)
    i2 = load_implementation(tmp_path / "i.txt")
    np.testing.assert_array_equal(i2.stacked().coeffs, impl.stacked().coeffs)

    w = LqrWeights(np.diag([1.0, 2.0, 3.0]), np.eye(2) / 3)
    save_weights(tmp_path / "w.txt", w)
    np.testing.assert_array_equal(load_weights(tmp_path / "w.txt").R, w.R)

    mask = delay_mask(chain_topology(5, [2, 4]), 1, 3)
    save_mask(tmp_path / "m.txt", mask)
    assert load_mask(tmp_path / "m.txt") == mask


def test_wrong_block_kinds(tmp_path, rng):
    sys, cl = random_clmaps(rng, 2, 1)
    save_system(tmp_path / "s.txt", sys)
    with pytest.raises(ValueError):
        load_clmaps(tmp_path / "s.txt")
    (tmp_path / "m.txt").write_text("1 1 1 1\n0.5\n1 1 1 1\n1\n")
    with pytest.raises(ValueError):
        load_mask(tmp_path / "m.txt")
