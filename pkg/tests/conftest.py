import pytest

from disfl_selftrain import judge, perturb, synthetic, tagger
from disfl_selftrain.linear import TrainConfig


@pytest.fixture(scope="session")
def news():
    return synthetic.fluent_corpus(4000, 101, "news")


@pytest.fixture(scope="session")
def sampler(news):
    return perturb.NgramSampler(news)


@pytest.fixture(scope="session")
def pseudo(news, sampler):
    return perturb.gen_disfluency_corpus(news, sampler, len(news), seed=11)


@pytest.fixture(scope="session")
def small_teacher(pseudo):
    return tagger.train(pseudo[:3000], TrainConfig(seed=3, epochs=3))


@pytest.fixture(scope="session")
def judge_pairs(news, sampler):
    return perturb.gen_judge_corpus(news, sampler, len(news), seed=12)


@pytest.fixture(scope="session")
def small_judge(judge_pairs):
    return judge.train_judge(judge_pairs, TrainConfig(seed=4, epochs=3))


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one line per acceptance criterion; printed at the end of the run."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
