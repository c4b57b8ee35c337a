"""Finite-difference gradient verification of every registered layer."""
import numpy as np
import pytest

from pulsenet import autodiff as ad
from pulsenet.gradcheck import CHECKS, TOLERANCES, check_case, grad_check


@pytest.mark.parametrize("name", sorted(CHECKS))
def test_double_precision(name):
    report = grad_check([name], trials=10, dtype=np.float64, seed=11)
    assert report[name]["max_rel_err"] <= 1e-6, report


@pytest.mark.parametrize("name", sorted(CHECKS))
def test_single_precision(name):
    report = grad_check([name], trials=10, dtype=np.float32, seed=12)
    assert report[name]["max_rel_err"] <= 1e-3, report


def test_relu_exact_on_positive_tensor():
    # away from the kink the ReLU Jacobian is exactly the identity mask
    x = ad.Tensor(np.full((2, 3, 4), 2.0), True)
    y = ad.relu(x)
    ad.sum_all(y).backward()
    np.testing.assert_array_equal(x.grad, np.ones((2, 3, 4)))


def test_tolerance_table_matches_precisions():
    assert TOLERANCES[np.dtype(np.float32)] == 1e-3
    assert TOLERANCES[np.dtype(np.float64)] == 1e-6
