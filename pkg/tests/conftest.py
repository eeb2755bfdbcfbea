"""
PyTest configuration and shared fixtures
"""

import numpy as np
import pytest

import database
from config import ModelConfig
from corpus.dataset import EMOTIONS, SEEKER, STRATEGIES, SUPPORTER, Dialogue, Utterance
from corpus.pipeline import prepare_examples
from corpus.vocab import Vocab
from modeling.model import TurnStateModel
from numerics import tensor as T


def pytest_addoption(parser):
    """Add custom command line options"""
    parser.addoption(
        "--run-integration",
        action="store_true",
        default=False,
        help="Run integration tests that need a user-supplied ESConv file"
    )
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run slow tests"
    )


def pytest_configure(config):
    """Configure test markers"""
    config.addinivalue_line("markers", "integration: mark test as integration test requiring ESConv data")
    config.addinivalue_line("markers", "slow: mark test as slow running")


def pytest_collection_modifyitems(config, items):
    """Skip tests based on command line options"""
    if not config.getoption("--run-integration"):
        skip_integration = pytest.mark.skip(reason="need --run-integration option to run")
        for item in items:
            if "integration" in item.keywords:
                item.add_marker(skip_integration)

    if not config.getoption("--run-slow"):
        skip_slow = pytest.mark.skip(reason="need --run-slow option to run")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip_slow)


SEEKER_LINES = {
    "sadness": ["i feel so sad and lonely since my breakup", "i miss my friends and cry every night"],
    "fear": ["i am worried i will lose my job", "i am anxious about the exam next week"],
    "anger": ["my boss yelled at me and i am so angry", "it is unfair how my roommate treats me"],
    "disgust": ["i am sick of the mess at home", "i feel ashamed of what i did"],
    "joy": ["thanks that makes me feel better", "i am glad i talked to you"],
    "neutral": ["i moved to a new city last month", "my sister lives with me now"],
}

SUPPORTER_LINES = {
    "question": ["how long have you been feeling this way", "what happened at work today"],
    "restatement_or_paraphrasing": ["so you are saying the job is stressful", "it sounds like the move was hard"],
    "reflection_of_feelings": ["you seem really hurt by this", "that must feel very lonely"],
    "self_disclosure": ["i went through a breakup last year too", "i also lost a job once"],
    "affirmation_and_reassurance": ["you are doing the best you can", "it is okay to feel upset"],
    "providing_suggestions": ["maybe try talking to your manager", "you could call a friend tonight"],
    "information": ["many people feel stress before exams", "sleep helps the mind recover"],
    "others": ["i am here for you", "take your time"],
}


def build_dialogues(count: int = 6, turns: int = 6, seed: int = 0):
    """Alternating seeker/supporter dialogues with gold labels on every turn."""
    rng = np.random.default_rng(seed)
    dialogues = []
    for i in range(count):
        utterances = []
        for t in range(turns):
            if t % 2 == 0:
                emotion = EMOTIONS[rng.integers(len(EMOTIONS))]
                lines = SEEKER_LINES[emotion]
                utterances.append(Utterance(SEEKER, lines[rng.integers(len(lines))], emotion=emotion))
            else:
                strategy = STRATEGIES[rng.integers(len(STRATEGIES))]
                lines = SUPPORTER_LINES[strategy]
                utterances.append(Utterance(SUPPORTER, lines[rng.integers(len(lines))], strategy=strategy))
        dialogues.append(Dialogue(id=f"d{i}", utterances=utterances))
    return dialogues


def all_lines():
    return [line for lines in list(SEEKER_LINES.values()) + list(SUPPORTER_LINES.values()) for line in lines]


@pytest.fixture(autouse=True)
def default_precision():
    """Tests run at 64-bit unless they switch precision themselves."""
    with T.precision(np.float64):
        yield


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path):
    """Point the preprocessing cache at a per-test SQLite file."""
    database.configure(f"sqlite:///{tmp_path / 'cache.db'}")
    yield
    database.configure("sqlite://")


@pytest.fixture
def dialogue_factory():
    return build_dialogues


@pytest.fixture
def dialogues():
    return build_dialogues()


@pytest.fixture
def vocab():
    return Vocab.build(all_lines())


@pytest.fixture
def examples(dialogues, vocab):
    return prepare_examples(dialogues, vocab, k=3, w=2, seed=0)


@pytest.fixture
def tiny_config():
    return ModelConfig(d_model=16, encoder_layers=1, decoder_layers=1, encoder_heads=2, decoder_heads=2,
                       graph_heads=2, emotion_heads=2, max_len=64, max_target_len=24)


@pytest.fixture
def tiny_model(tiny_config, vocab):
    return TurnStateModel(tiny_config, len(vocab), vocab.special_ids, seed=0)


@pytest.fixture
def tmp_output_dir(tmp_path):
    """Create temporary output directory"""
    output_dir = tmp_path / "output"
    output_dir.mkdir()
    return output_dir
