import numpy as np
import pytest

from lmpkit.cones import (
    PolyCone,
    approx_separate,
    intersection_nonempty,
    random_family,
    sec_bounded,
)
from lmpkit.errors import InputError
from lmpkit.lp import solve_standard_form
from oracles import intersection_by_sampling


def halfspace(direction, open=True, x0=None):
    return PolyCone(generators=np.array([direction], dtype=float), open=open, x0=x0)


class TestSimplexCore:
    def test_basic_lp(self):
        # min -x1 - x2 s.t. x1 + x2 + s = 1
        res = solve_standard_form(
            np.array([-1.0, -1.0, 0.0]),
            np.array([[1.0, 1.0, 1.0]]),
            np.array([1.0]),
        )
        assert res.status == "optimal"
        assert res.objective == pytest.approx(-1.0, abs=1e-12)

    def test_infeasible(self):
        res = solve_standard_form(
            np.array([1.0]), np.array([[0.0]]), np.array([1.0])
        )
        assert res.status == "infeasible"

    def test_unbounded(self):
        # min -x1 with a vacuous equality row
        res = solve_standard_form(
            np.array([-1.0, 0.0]),
            np.array([[0.0, 1.0]]),
            np.array([0.0]),
        )
        assert res.status == "unbounded"


class TestIntersection:
    def test_disjoint_halfspaces(self):
        closed = halfspace([1.0, 0.0], open=False)
        open_cone = halfspace([-1.0, 0.0], x0=np.array([-1.0, 0.0]))
        result = intersection_nonempty([closed, open_cone])
        assert not result.nonempty
        assert result.margin <= 0.0

    def test_same_halfspace(self):
        closed = halfspace([1.0, 0.0], open=False)
        open_cone = halfspace([1.0, 0.0], x0=np.array([1.0, 0.0]))
        result = intersection_nonempty([closed, open_cone])
        assert result.nonempty
        assert result.witness is not None
        assert float(result.witness @ np.array([1.0, 0.0])) > 0.0

    def test_degenerate_input(self):
        empty = PolyCone(generators=np.zeros((0, 2)), open=True)
        with pytest.raises(InputError):
            intersection_nonempty([empty, halfspace([1.0, 0.0], open=False)])

    def test_at_most_one_closed(self):
        with pytest.raises(InputError):
            intersection_nonempty(
                [halfspace([1.0, 0.0], open=False), halfspace([0.0, 1.0], open=False)]
            )

    def test_against_sampling_oracle(self):
        agree = 0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            family = random_family(rng, dim=4)
            result = intersection_nonempty(family)
            sampled = intersection_by_sampling(family, nsamples=1_000_000, seed=seed)
            if result.nonempty == sampled:
                agree += 1
            else:
                # the sampler resolves only reasonably fat intersections
                assert abs(result.margin) <= 5e-2
        assert agree >= 45


class TestSeparation:
    def test_opposite_rays_cancel(self):
        closed = halfspace([1.0, 0.0], open=False)
        open_cone = halfspace([-1.0, 0.0], x0=np.array([-1.0, 0.0]))
        result = approx_separate([closed, open_cone], eps=1e-6)
        assert result.separated
        assert result.objective <= 1e-12
        h0, h1 = result.h
        assert float(np.linalg.norm(h0 + h1, ord=1)) <= 1e-9
        assert float(np.array([-1.0, 0.0]) @ h1) == pytest.approx(1.0, abs=1e-9)

    def test_identical_rays_cannot_separate(self):
        closed = halfspace([1.0, 0.0], open=False)
        open_cone = halfspace([1.0, 0.0], x0=np.array([1.0, 0.0]))
        result = approx_separate([closed, open_cone], eps=1e-6)
        assert not result.separated
        assert result.objective >= 1.0 - 1e-9

    def test_missing_interior_point(self):
        closed = halfspace([1.0, 0.0], open=False)
        nameless = PolyCone(generators=np.array([[0.0, 1.0]]), open=True)
        with pytest.raises(InputError):
            approx_separate([closed, nameless], eps=1e-6)

    def test_two_cone_specialisation_matches_general_path(self):
        # with one open cone the family LP reduces to the two-cone statement
        rng = np.random.default_rng(2)
        for _ in range(20):
            x0 = rng.normal(size=3)
            x0 /= np.linalg.norm(x0)
            gens = []
            while len(gens) < 3:
                g = rng.normal(size=3)
                if g @ x0 > 0.1 * np.linalg.norm(g):
                    gens.append(g)
            open_cone = PolyCone(generators=np.array(gens), open=True, x0=x0)
            closed = PolyCone(generators=rng.normal(size=(3, 3)), open=False)
            family = [closed, open_cone]
            inter = intersection_nonempty(family)
            sep = approx_separate(family, eps=1e-6)
            if abs(inter.margin) > 1e-9:
                assert sep.separated == (not inter.nonempty)

    def test_homogeneity_of_verdicts(self):
        rng = np.random.default_rng(4)
        for seed in range(10):
            family = random_family(np.random.default_rng(seed))
            scale = float(rng.uniform(0.1, 10.0))
            scaled = [
                PolyCone(generators=scale * np.asarray(c.generators), open=c.open, x0=c.x0)
                for c in family
            ]
            a = intersection_nonempty(family)
            b = intersection_nonempty(scaled)
            assert a.nonempty == b.nonempty
            sa = approx_separate(family, eps=1e-6)
            sb = approx_separate(scaled, eps=1e-6)
            assert sa.separated == sb.separated


class TestSectionBound:
    def test_quadrant_section(self):
        cone = PolyCone(
            generators=np.array([[1.0, 0.0], [0.0, 1.0]]), open=True, x0=np.array([1.0, 1.0])
        )
        bound, empty = sec_bounded(cone, np.array([1.0, 1.0]))
        assert not empty
        assert bound == pytest.approx(1.0, abs=1e-12)

    def test_single_ray(self):
        cone = halfspace([1.0, 0.0], x0=np.array([1.0, 0.0]))
        bound, empty = sec_bounded(cone, np.array([1.0, 0.0]))
        assert not empty
        assert bound == pytest.approx(1.0, abs=1e-12)

    def test_boundary_point_is_input_error(self):
        cone = PolyCone(
            generators=np.array([[1.0, 0.0], [0.0, 1.0]]),
            open=True,
            x0=np.array([1.0, 1.0]),
        )
        with pytest.raises(InputError):
            sec_bounded(cone, np.array([1.0, 0.0]))

    def test_trivial_cone_empty_section(self):
        cone = PolyCone(generators=np.zeros((0, 2)), open=False)
        bound, empty = sec_bounded(cone, np.array([1.0, 0.0]))
        assert empty
        assert bound == 0.0


class TestConstructionInvariants:
    def test_x0_strict_interiority_enforced(self):
        with pytest.raises(InputError):
            PolyCone(
                generators=np.array([[1.0, 0.0], [0.0, 1.0]]),
                open=True,
                x0=np.array([1.0, 0.0]),
            )

    def test_zero_generator_rejected(self):
        with pytest.raises(InputError):
            PolyCone(generators=np.array([[0.0, 0.0]]), open=True)


def test_separation_iff_empty_intersection():
    # the two LPs are exact complements away from the degenerate band, which
    # holds the instances whose margin is positive but within simplex noise
    degenerate = 0
    for seed in range(40):
        rng = np.random.default_rng(100 + seed)
        family = random_family(rng)
        inter = intersection_nonempty(family)
        if 0.0 < inter.margin <= 1e-9:
            degenerate += 1
            continue
        sep = approx_separate(family, eps=1e-6)
        assert sep.separated == (not inter.nonempty), f"seed {seed}"
    assert degenerate <= 3
