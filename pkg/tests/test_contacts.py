import numpy as np
import pytest

from terramotion.contacts import detect_foot_contacts
from terramotion.errors import OutOfBounds
from terramotion.heightfield import HeightField
from terramotion.kinematics import forward_kinematics
from terramotion.motion import rest_segment
from terramotion.skeleton import default_skeleton

SK = default_skeleton()


def flat(h=0.0):
    return HeightField(np.full((41, 41), h), 0.5, (-10.0, -10.0))


def test_resting_feet_detected():
    seg = rest_segment(4, root=(0.0, 0.91, 0.0))
    pos = forward_kinematics(SK, seg)
    labels = detect_foot_contacts(SK, pos, flat(0.0))
    assert np.all(labels == 1)  # all four feet within 5 cm, zero velocity


def test_high_feet_not_in_contact():
    seg = rest_segment(4, root=(0.0, 1.41, 0.0))  # feet 0.5 m up
    pos = forward_kinematics(SK, seg)
    labels = detect_foot_contacts(SK, pos, flat(0.0))
    assert np.all(labels == 0)


def test_speed_gate_rejects_sliding_feet():
    seg = rest_segment(5, root=(0.0, 0.91, 0.0))
    pos = forward_kinematics(SK, seg)
    pos = pos.copy()
    pos[:, :, 0] += 0.10 * np.arange(5)[:, None]  # 0.10 m/frame slide
    # clearance ~2 cm but moving too fast: every label is 0
    labels = detect_foot_contacts(SK, pos, flat(0.0))
    assert np.all(labels == 0)


def test_out_of_bounds_foot_raises():
    seg = rest_segment(2, root=(50.0, 0.91, 0.0))
    pos = forward_kinematics(SK, seg)
    with pytest.raises(OutOfBounds):
        detect_foot_contacts(SK, pos, flat(0.0))
