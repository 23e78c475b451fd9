import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percolab.lattice import (
    Configuration,
    LatticeKind,
    LatticeSpec,
    dual_configuration,
    enumerate_configurations,
    sample_configuration,
    sample_uniforms,
)
from percolab.rng import SeedSchedule, derive_seed

kinds = st.sampled_from([LatticeKind.SITE, LatticeKind.BOND])
dims = st.integers(min_value=1, max_value=12)


class TestSpec:
    def test_spacing_is_reciprocal_long_side(self):
        assert LatticeSpec(LatticeKind.BOND, 8, 4).spacing == 1.0 / 8.0
        assert LatticeSpec(LatticeKind.SITE, 3, 7).spacing == 1.0 / 7.0

    def test_element_counts(self):
        assert LatticeSpec(LatticeKind.SITE, 4, 5).element_count == 20
        assert LatticeSpec(LatticeKind.BOND, 3, 2).element_count == 12
        assert LatticeSpec(LatticeKind.BOND, 3, 3).element_count == 18

    def test_rejects_zero_dimension(self):
        with pytest.raises(ValueError):
            LatticeSpec(LatticeKind.SITE, 0, 3)
        with pytest.raises(ValueError):
            LatticeSpec(LatticeKind.BOND, 3, -1)

    def test_site_positions_center_cells(self):
        spec = LatticeSpec(LatticeKind.SITE, 4, 4)
        assert spec.site_position(0, 0) == (0.125, 0.125)
        assert spec.site_position(3, 3) == (0.875, 0.875)


class TestSampling:
    def test_density_one_all_open(self):
        c = sample_configuration(LatticeSpec(LatticeKind.BOND, 3, 3), 1.0, 99)
        assert c.occupancy.all()

    def test_density_zero_all_closed(self):
        c = sample_configuration(LatticeSpec(LatticeKind.SITE, 4, 4), 0.0, 99)
        assert not c.occupancy.any()

    def test_reproducible(self):
        spec = LatticeSpec(LatticeKind.BOND, 16, 16)
        a = sample_configuration(spec, 0.5, 1234)
        b = sample_configuration(spec, 0.5, 1234)
        assert np.array_equal(a.occupancy, b.occupancy)

    def test_rejects_bad_density(self):
        with pytest.raises(ValueError):
            sample_configuration(LatticeSpec(LatticeKind.BOND, 2, 2), 1.5, 0)

    def test_mean_occupancy_concentrates(self):
        spec = LatticeSpec(LatticeKind.BOND, 16, 16)
        sched = SeedSchedule(31337)
        total = sum(
            sample_configuration(spec, 0.5, derive_seed(sched, i)).occupancy.sum()
            for i in range(400)
        )
        n = 400 * spec.element_count
        sigma = 0.5 * np.sqrt(n)
        assert abs(total - 0.5 * n) < 3 * sigma

    @given(kinds, dims, dims, st.floats(0.1, 0.9))
    @settings(max_examples=40, deadline=None)
    def test_monotone_coupling(self, kind, cols, rows, p):
        # same uniforms, higher threshold: occupancy can only grow
        spec = LatticeSpec(kind, cols, rows)
        u = sample_uniforms(spec, 777)
        lo, hi = u < p * 0.5, u < p
        assert not (lo & ~hi).any()


class TestSerialization:
    @given(kinds, dims, dims, st.integers(0, 2**64 - 1))
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, kind, cols, rows, seed):
        spec = LatticeSpec(kind, cols, rows)
        c = sample_configuration(spec, 0.37, seed)
        d = Configuration.from_bytes(c.to_bytes())
        assert d.spec == c.spec
        assert d.seed == c.seed
        assert d.density == c.density
        assert np.array_equal(d.occupancy, c.occupancy)

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            Configuration.from_bytes(b"not a configuration")

    def test_occupancy_length_enforced(self):
        spec = LatticeSpec(LatticeKind.SITE, 3, 3)
        with pytest.raises(ValueError):
            Configuration(spec, np.zeros(5, dtype=bool), 0, 0.5)


class TestDuality:
    def test_all_open_dual_all_closed(self):
        c = sample_configuration(LatticeSpec(LatticeKind.BOND, 4, 4), 1.0, 0)
        assert not dual_configuration(c).occupancy.any()

    def test_site_kind_rejected(self):
        c = sample_configuration(LatticeSpec(LatticeKind.SITE, 4, 4), 0.5, 0)
        with pytest.raises(ValueError):
            dual_configuration(c)

    @given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 2**32))
    @settings(max_examples=60, deadline=None)
    def test_involution_is_translation(self, cols, rows, seed):
        c = sample_configuration(LatticeSpec(LatticeKind.BOND, cols, rows), 0.5, seed)
        dd = dual_configuration(dual_configuration(c))
        e, nb = c.east_bonds(), c.north_bonds()
        ee, nn = dd.east_bonds(), dd.north_bonds()
        assert np.array_equal(ee, np.roll(np.roll(e, -1, 0), -1, 1))
        assert np.array_equal(nn, np.roll(np.roll(nb, -1, 0), -1, 1))

    def test_single_open_bond_hand_checked(self):
        spec = LatticeSpec(LatticeKind.BOND, 2, 2)
        occ = np.zeros(spec.element_count, dtype=bool)
        occ[0] = True  # east bond at site (0, 0)
        c = Configuration(spec, occ, 0, 0.5)
        d = dual_configuration(c)
        # the dual north bond crossing E(0,0) sits at dual column 0, row 1;
        # with the wrap convention that is dN(0, 1) = not E(0, 1+1 mod 2)
        assert d.north_bonds().sum() == spec.rows * spec.cols - 1
        assert not d.north_bonds()[1, 0]


class TestEnumeration:
    def test_counts_and_order(self):
        spec = LatticeSpec(LatticeKind.BOND, 2, 1)  # 4 elements
        configs = list(enumerate_configurations(spec))
        assert len(configs) == 16
        codes = [int("".join("1" if b else "0" for b in c.occupancy), 2) for c in configs]
        assert codes == sorted(codes)
        assert codes[0] == 0 and codes[-1] == 15

    def test_single_element(self):
        spec = LatticeSpec(LatticeKind.SITE, 1, 1)
        occs = [c.occupancy[0] for c in enumerate_configurations(spec)]
        assert occs == [False, True]

    def test_refuses_large(self):
        with pytest.raises(ValueError):
            list(enumerate_configurations(LatticeSpec(LatticeKind.SITE, 6, 6)))
