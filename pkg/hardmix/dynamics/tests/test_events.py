"""Tests for `hardmix.dynamics.events`."""
import numpy as np
import pytest

from hypothesis import given, settings
from hypothesis import strategies as st

from hardmix.dynamics.events import (
    EventKind,
    contact_times,
    next_event,
    time_to_contact,
)
from hardmix.exceptions import InvalidStateError, PathologyError
from hardmix.mixture.configuration import Configuration
from hardmix.mixture.species import MixtureParams, SpeciesKind

A0 = (SpeciesKind.A, 0)
B0 = (SpeciesKind.B, 0)

unit_params = MixtureParams(2, mass=(1.0, 1.0), diameter=(1.0, 1.0))


class TestTimeToContact:
    def test_head_on(self):
        contact = time_to_contact([2.0, 0.0], [-1.0, 0.0], 1.0)
        assert contact.time == 1.0
        assert not contact.grazing

    def test_receding(self):
        assert time_to_contact([2.0, 0.0], [1.0, 0.0], 1.0) is None

    def test_missing(self):
        assert time_to_contact([2.0, 3.0], [-1.0, 0.0], 1.0) is None

    def test_tangent(self):
        contact = time_to_contact([2.0, 1.0], [-1.0, 0.0], 1.0)
        assert contact.time == pytest.approx(2.0)
        assert contact.grazing

    def test_at_rest(self):
        assert time_to_contact([2.0, 0.0], [0.0, 0.0], 1.0) is None

    def test_overlap(self):
        with pytest.raises(InvalidStateError):
            time_to_contact([0.5, 0.0], [1.0, 0.0], 1.0)

    @given(
        st.floats(1.01, 10.0),
        st.floats(0.0, 2 * np.pi),
        st.floats(-0.99, 0.99),
        st.floats(0.1, 10.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_against_bisection(self, dist, angle, aim, speed):
        x = dist * np.array([np.cos(angle), np.sin(angle)])
        # aim < 1 in units of the angular radius of the target means a hit
        half_angle = np.arcsin(1.0 / dist)
        heading = angle + np.pi + aim * half_angle
        v = speed * np.array([np.cos(heading), np.sin(heading)])

        contact = time_to_contact(x, v, 1.0)
        assert contact is not None

        lo, hi = 0.0, contact.time
        gap = lambda s: np.linalg.norm(x + s * v) - 1.0  # noqa: E731
        assert abs(gap(contact.time)) <= 1e-9
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if gap(mid) > 0:
                lo = mid
            else:
                hi = mid
        assert hi == pytest.approx(contact.time, rel=1e-8, abs=1e-12)

    def test_vectorized_matches(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-5, 5, (200, 3))
        x = x[np.linalg.norm(x, axis=1) > 1.0]
        v = rng.standard_normal(x.shape)
        times = contact_times(x, v, np.ones(len(x)))
        for xi, vi, ti in zip(x, v, times):
            contact = time_to_contact(xi, vi, 1.0)
            if contact is None:
                assert np.isinf(ti)
            else:
                assert ti == pytest.approx(contact.time)


class TestNextEvent:
    def test_no_collision(self):
        z = Configuration(
            [[0.0, 0.0], [10.0, 10.0]],
            [[-1.0, 0.0], [0.0, 0.0]],
            [[3.0, 0.0]],
            [[1.0, 0.0]],
        )
        assert next_event(z, unit_params) is None

    def test_single_pair(self):
        z = Configuration([[0.0, 0.0]], [[1.0, 0.0]], [[5.0, 0.0]], [[-1.0, 0.0]])
        event = next_event(z, unit_params)
        assert event.time == 2.0
        assert event.pair == (A0, B0)
        assert event.kind is EventKind.CONTACT

    def test_earliest_pair_wins(self):
        z = Configuration(
            [[0.0, 10.0], [0.0, 0.0]],
            [[1.0, 0.0], [1.0, 0.0]],
            [[10.0, 10.0], [5.0, 0.0]],
            [[-1.0, 0.0], [-1.0, 0.0]],
        )
        event = next_event(z, unit_params)
        assert event.time == 2.0
        assert event.pair == ((SpeciesKind.A, 1), (SpeciesKind.B, 1))

    def test_pre_collisional_start_is_collided_first(self):
        z = Configuration([[0.0, 0.0]], [[1.0, 0.0]], [[1.0, 0.0]], [[-1.0, 0.0]])
        assert next_event(z, unit_params) is None

    def test_grazing_start(self):
        z = Configuration([[0.0, 0.0]], [[0.0, 1.0]], [[1.0, 0.0]], [[0.0, -1.0]])
        with pytest.raises(PathologyError):
            next_event(z, unit_params)

    def test_single_particle(self):
        z = Configuration([[0.0, 0.0]], [[1.0, 0.0]], [], [])
        assert next_event(z, unit_params) is None
