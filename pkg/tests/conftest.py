import numpy as np
import pytest

from emocause import synth
from emocause.config import RunConfig
from emocause.store import load_store

TINY_DIM = 16


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("fixtures")


@pytest.fixture(scope="session")
def corpus20(fixture_dir):
    """20 single-exchange dialogues (one conversation each), train split."""
    fx = synth.generate_corpus(20, seed=7, exchanges=lambda i: 1)
    path = fixture_dir / "corpus20.csv"
    synth.write_corpus_csv(fx, path)
    sidecar = fixture_dir / "corpus20.annotations"
    synth.write_sidecar(fx, sidecar)
    return fx, str(path), str(sidecar)


@pytest.fixture(scope="session")
def corpus10(fixture_dir):
    """Default exchange pattern: 10 dialogues, 23 conversations."""
    fx = synth.generate_corpus(10, seed=3)
    path = fixture_dir / "corpus10.csv"
    synth.write_corpus_csv(fx, path)
    sidecar = fixture_dir / "corpus10.annotations"
    synth.write_sidecar(fx, sidecar)
    return fx, str(path), str(sidecar)


@pytest.fixture(scope="session")
def store_files(fixture_dir, corpus20, corpus10):
    """Scenario store whose embeddings also cover the corpus vocabulary."""
    tokens = corpus20[0].tokens() | corpus10[0].tokens()
    assertions = fixture_dir / "assertions.tsv"
    embeddings = fixture_dir / "embeddings.txt"
    synth.write_store_files(assertions, embeddings, dim=TINY_DIM, seed=11,
                            extra_tokens=sorted(tokens))
    return str(assertions), str(embeddings)


@pytest.fixture(scope="session")
def store(store_files):
    return load_store(store_files[0], store_files[1], min_weight=0.0)


def make_tiny_config(store_files, dataset_path, out_dir, **overrides):
    cfg = RunConfig(
        store_path=store_files[0],
        embeddings_path=store_files[1],
        dataset_path=str(dataset_path),
        output_dir=str(out_dir),
        d_model=TINY_DIM,
        d_g=8,
        d_gru=16,
        n_heads=2,
        d_head=8,
        d_ff=16,
        enc_layers=1,
        dec_layers=1,
        gcn_layers=1,
        num_buckets=4,
        vocab_size=160,
        max_context_len=96,
        max_target_len=24,
        top_k=3,
        hops=2,
        gamma=0.8,
        batch_size=8,
        lr=2e-3,
        loss_weight=1.0,
        max_steps=2000,
        seed=0,
        beam=5,
        validate_every=100,
        patience=5,
        accuracy_stop=0.0,
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


@pytest.fixture()
def tiny_config(store_files, corpus20, tmp_path):
    return make_tiny_config(store_files, corpus20[1], tmp_path / "run",
                            detector="oracle", annotations_path=corpus20[2])


@pytest.fixture(scope="session")
def overfit_run(store_files, corpus20, tmp_path_factory):
    """Train the tiny model to memorization once; shared by CLI/acceptance."""
    import time
    from types import SimpleNamespace

    from emocause.data import build_vocabulary, load_dataset
    from emocause.model import ResponseModel
    from emocause.nn import save_checkpoint
    from emocause.pipeline import prepare_split
    from emocause.train import teacher_forced_stats, train

    out = tmp_path_factory.mktemp("overfit")
    cfg = make_tiny_config(
        store_files, corpus20[1], out,
        detector="oracle", annotations_path=corpus20[2],
        accuracy_stop=0.995, checkpoint=str(out / "model.ckpt"),
        cache_dir=str(out / "cache"), vocab_path=str(out / "vocab.txt"),
    )
    store = load_store(cfg.store_path, cfg.embeddings_path)
    vocab = build_vocabulary(load_dataset(cfg.dataset_path, "train"),
                             cfg.vocab_size)
    vocab.save(cfg.vocab_path)
    examples, _ = prepare_split(cfg, "train", vocab, store)
    model = ResponseModel(cfg, vocab, store)
    t0 = time.perf_counter()
    result = train(model, examples, cfg, checkpoint_path=cfg.checkpoint)
    duration = time.perf_counter() - t0
    save_checkpoint(cfg.checkpoint, model.registry)
    stats = teacher_forced_stats(model, examples)
    return SimpleNamespace(cfg=cfg, store=store, vocab=vocab,
                           examples=examples, model=model, result=result,
                           duration=duration, stats=stats)


def random_embedding_file(path, tokens, dim, seed):
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as fh:
        for tok in tokens:
            vec = rng.standard_normal(dim)
            vec /= np.linalg.norm(vec)
            fh.write(tok + " " + " ".join(f"{x:.8f}" for x in vec) + "\n")
