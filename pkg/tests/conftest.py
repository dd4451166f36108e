import pytest

from hesitancy.config import load_config
from hesitancy.synth import SynthParams, generate


@pytest.fixture(scope="session")
def synth_paths(tmp_path_factory):
    """The bundled synthetic fixture (~1000 tweets, 20 zips, nonlinear signal)."""
    out = tmp_path_factory.mktemp("synthfix")
    return generate(out, SynthParams(seed=7))


@pytest.fixture(scope="session")
def synth_config(synth_paths):
    return load_config(synth_paths["config"])


@pytest.fixture(scope="session")
def mini_paths(tmp_path_factory):
    """A small fixture for fast end-to-end runs."""
    out = tmp_path_factory.mktemp("minifix")
    return generate(
        out,
        SynthParams(
            n_zips=6,
            min_tweets_per_zip=14,
            max_tweets_per_zip=18,
            dim=24,
            seed=11,
            n_retweets=2,
            n_out_of_area=2,
        ),
    )
