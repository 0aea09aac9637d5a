from types import SimpleNamespace

import pytest
from hypothesis import settings

from bugloc import evaluation, pipeline, synthgen
from bugloc.corpus import TokenRules

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


@pytest.fixture
def rules():
    return TokenRules(stopwords=frozenset({"a", "the", "in", "is", "of"}), min_length=2)


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """Default synthetic dataset, generated once per session."""
    root = tmp_path_factory.mktemp("synthdata")
    synthgen.generate(synthgen.SynthSpec(), root)
    return root


@pytest.fixture(scope="session")
def eval_bundle(synth_dir, tmp_path_factory):
    """One full evaluation over the synthetic dataset, shared by tests."""
    out = tmp_path_factory.mktemp("evalout")
    cfg = pipeline.RunConfig(
        dataset_name="synthetic",
        reports=str(synth_dir / "reports.jsonl"),
        sources=str(synth_dir / "sources.jsonl"),
        metrics=str(synth_dir / "metrics.csv"),
        embeddings=str(synth_dir / "embeddings.txt"),
        out_dir=str(out),
    )
    dataset = pipeline.load_dataset(cfg, use_cache=False)
    scorer = pipeline.prepare_scorer(dataset, cfg)
    ctx = pipeline.build_eval_context(dataset, cfg, scorer=scorer)
    result = evaluation.evaluate_methods(ctx, cfg.eval_config())
    return SimpleNamespace(cfg=cfg, dataset=dataset, scorer=scorer, ctx=ctx, result=result)
