import pytest

from dmar.schedule import (LambdaMode, ParameterError, Policy, ProtocolParams,
                           build_schedule, max_cluster_size, max_route_length,
                           tree_height_bound)


class TestTreeHeightBound:
    def test_psi_8(self):
        assert tree_height_bound(8) == 9

    def test_psi_2_zero_case(self):
        assert tree_height_bound(2) == 0

    def test_psi_4(self):
        assert tree_height_bound(4) == 3

    def test_ceiling_on_odd_psi(self):
        assert tree_height_bound(5) == 5  # ceil(4.5)

    def test_rejects_small_psi(self):
        with pytest.raises(ParameterError):
            tree_height_bound(1)


class TestMaxRouteLength:
    def test_default_psi8_k8(self):
        assert max_route_length(8, 8) == 640

    def test_default_base_case(self):
        assert max_route_length(2, 1) == 8

    def test_analytic_formula(self):
        # s = 2*k*(L+1)+1; psi=4, k=2 -> s = 17, lambda = 2*17^3
        s = 2 * 2 * (tree_height_bound(4) + 1) + 1
        assert max_route_length(4, 2, LambdaMode.ANALYTIC) == 2 * s ** 3

    def test_override(self):
        assert max_route_length(8, 4, LambdaMode.OVERRIDE, override=17) == 17
        with pytest.raises(ParameterError):
            max_route_length(8, 4, LambdaMode.OVERRIDE, override=0)


def test_max_cluster_size_geometric_series():
    assert max_cluster_size(4, 4) == (4 ** 4 - 1) // 3
    assert max_cluster_size(2, 4) == 1


class TestSchedule:
    def test_fields_depend_only_on_parameters(self):
        p = ProtocolParams(k=4, psi=8)
        s = build_schedule(p)
        assert s.steps_election == 1
        assert s.steps_soac_outer == 3
        assert s.steps_join_inner == 9
        assert s.steps_lma == 18
        assert s.steps_dissolve == 9
        assert s.steps_tmar_broadcast == 10
        assert s.steps_em == 320
        assert s.steps_per_round == 1 + 3 * 10 + 18 + 9 + 10 + 320

    def test_psi2_degenerate(self):
        s = build_schedule(ProtocolParams(k=1, psi=2))
        assert s.steps_soac_outer == 1
        assert s.steps_join_inner == 0
        assert s.steps_em == 8


class TestProtocolParams:
    def test_validation(self):
        with pytest.raises(ParameterError):
            ProtocolParams(k=0)
        with pytest.raises(ParameterError):
            ProtocolParams(k=1, psi=1)
        with pytest.raises(ParameterError):
            ProtocolParams(k=1, c=1)

    def test_collision_gci_incompatible(self):
        with pytest.raises(ParameterError):
            ProtocolParams(k=2, policy=Policy.DMAR_GCI, collision_mode=True)
