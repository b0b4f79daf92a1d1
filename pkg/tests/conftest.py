import pytest

from trackqa import align, synth


@pytest.fixture(scope="session")
def small_scenario():
    """30-frame moving-camera scene with jitter and injected outliers."""
    cfg = synth.ScenarioConfig(
        frames=30,
        camera_translation_sigma=2.0,
        camera_rotation_sigma_deg=0.1,
        jitter_sigma=2.0,
        outlier_prob=0.1,
        object_path=synth.ObjectPath(kind="line", start=(140, 110), velocity=(0.5, 0.2)),
        seed=4,
    )
    return synth.generate(cfg)


@pytest.fixture(scope="session")
def small_alignment(small_scenario):
    return align.align_sequence(small_scenario.frames, small_scenario.noisy)


@pytest.fixture(scope="session")
def static_scenario():
    """Static camera, smooth object path, clean annotations."""
    cfg = synth.ScenarioConfig(
        frames=25,
        camera_translation_sigma=0.0,
        camera_rotation_sigma_deg=0.0,
        object_path=synth.ObjectPath(kind="line", start=(120, 100), velocity=(1.0, 0.5)),
        seed=9,
    )
    return synth.generate(cfg)
