"""Unified command line: corpus generation, training, evaluation, and serving.

Report-producing commands write JSON plus CSV next to rendered PNG figures.
Training and search settings come from an optional JSON config file with
``search``, ``train``, ``reward`` and ``model`` sections; omitted fields
keep their defaults.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import click

from .inventory import GeneratorConfig, generate_benchmark, load_corpus, load_inventory, save_corpus
from .policy import (
    ModelConfig,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train_greedy_classifier,
    train_no_state_transition,
    train_policy,
    train_supervised,
)
from .reward import RewardConfig
from .search import SearchConfig, self_play_episode

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
logger = logging.getLogger(__name__)


def _load_sections(config_path: str | None) -> dict:
    if not config_path:
        return {}
    return json.loads(Path(config_path).read_text(encoding="utf-8"))


def _configs(sections: dict, seed: int | None = None):
    search = SearchConfig(**sections.get("search", {}))
    train_kw = dict(sections.get("train", {}))
    model_kw = dict(sections.get("model", {}))
    if seed is not None:
        train_kw.setdefault("seed", seed)
        model_kw.setdefault("seed", seed)
    return (
        search,
        TrainConfig(**train_kw),
        RewardConfig(**sections.get("reward", {})),
        ModelConfig(**model_kw),
    )


def _write_csv(path: Path, rows: list[list]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)


@click.group()
def main() -> None:
    """Interactive query clarification toolkit."""


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--intents", "n_intents", type=int, default=200, show_default=True)
@click.option("--labels", "n_labels", type=int, default=80, show_default=True)
@click.option("--queries", "n_queries", type=int, default=500, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def gen(seed: int, n_intents: int, n_labels: int, n_queries: int, out_dir: str) -> None:
    """Generate a seeded synthetic benchmark corpus."""
    cfg = GeneratorConfig(n_intents=n_intents, n_labels=n_labels, n_queries=n_queries)
    corpus = generate_benchmark(cfg, seed)
    save_corpus(corpus, out_dir)
    click.echo(
        f"wrote {len(corpus.queries)} queries over {n_intents} intents / "
        f"{n_labels} labels to {out_dir}"
    )


@main.command()
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--limit", type=int, default=None, help="only the first N training queries")
def selfplay(corpus_dir: str, config_path: str | None, out_path: str, limit: int | None) -> None:
    """Emit search-generated training pairs as JSON lines."""
    import numpy as np

    from .search import NoCandidatesError

    corpus = load_corpus(corpus_dir)
    sections = _load_sections(config_path)
    search_cfg, _, reward_cfg, _ = _configs(sections)
    queries = corpus.train[:limit] if limit else corpus.train
    written = 0
    with Path(out_path).open("w", encoding="utf-8") as fh:
        for qi, aq in enumerate(queries):
            rng = np.random.default_rng(np.random.SeedSequence([search_cfg.seed, 0, qi]))
            try:
                steps, _ = self_play_episode(corpus.inventory, aq, search_cfg, reward_cfg, rng=rng)
            except NoCandidatesError as exc:
                logger.warning("skipping %r: %s", aq.text, exc)
                continue
            for step in steps:
                fh.write(
                    json.dumps(
                        {
                            "query": step.query_text,
                            "prefix": list(step.prefix),
                            "pi": {str(k): v for k, v in sorted(step.pi.items())},
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
                written += 1
    click.echo(f"wrote {written} training pairs to {out_path}")


@main.command()
@click.option("--method", type=click.Choice(["rl", "greedy", "supervised", "nst"]), required=True)
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None, help="override config seeds")
def train(method: str, corpus_dir: str, config_path: str | None, out_path: str, seed: int | None) -> None:
    """Train the policy or one of the baselines and write a checkpoint."""
    corpus = load_corpus(corpus_dir)
    sections = _load_sections(config_path)
    search_cfg, train_cfg, reward_cfg, model_cfg = _configs(sections, seed)
    if method == "rl":
        model, log = train_policy(corpus, search_cfg, train_cfg, reward_cfg, model_cfg)
    elif method == "greedy":
        model, log = train_greedy_classifier(corpus, train_cfg, model_cfg)
    elif method == "supervised":
        model, log = train_supervised(
            corpus, train_cfg, reward_cfg, horizon=search_cfg.horizon, model_cfg=model_cfg
        )
    else:
        model, log = train_no_state_transition(corpus, train_cfg, model_cfg)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out)
    log_path = out.with_suffix(".log.json")
    log_path.write_text(json.dumps(log.epochs, indent=2), encoding="utf-8")
    from .figures import plot_training_curves

    fig_path = plot_training_curves(log, out.with_suffix(".curves.png"))
    click.echo(f"checkpoint: {out}\nlog: {log_path}\nfigure: {fig_path}")


@main.command()
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--query", required=True)
@click.option("-n", "n", type=int, default=6, show_default=True)
@click.option("--inventory", "inventory_path", type=click.Path(exists=True), required=True)
def recommend(ckpt_path: str, query: str, n: int, inventory_path: str) -> None:
    """Print the top-n label phrases for a query."""
    inv = load_inventory(inventory_path)
    model = load_checkpoint(ckpt_path)
    tau = model.recommend(inv, query, n)
    for rank, x in enumerate(tau, 1):
        click.echo(f"{rank}. {inv.labels[x].phrase}  (label {x})")


@main.command(name="eval")
@click.option("--ckpt", "ckpt_paths", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--split", type=click.Choice(["test", "train"]), default="test", show_default=True)
def eval_cmd(ckpt_paths: tuple[str, ...], corpus_dir: str, out_path: str, split: str) -> None:
    """Offline recall report plus complementarity metrics and figures."""
    from .evaluation import complementarity_report, run_offline_eval
    from .figures import plot_complementarity, plot_offline_recall

    corpus = load_corpus(corpus_dir)
    methods = {Path(p).stem: load_checkpoint(p) for p in ckpt_paths}
    report = run_offline_eval(methods, corpus, split=split)
    comp = complementarity_report(methods, corpus, split=split)

    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {"offline": report.to_dict(), "complementarity": comp.to_dict()}
    out.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    _write_csv(out.with_suffix(".csv"), report.csv_rows() + [[]] + comp.csv_rows())
    out.with_suffix(".txt").write_text(report.text_table() + "\n", encoding="utf-8")
    fig1 = plot_offline_recall(report, out.with_suffix(".recall.png"))
    fig2 = plot_complementarity(comp, out.with_suffix(".complementarity.png"))
    click.echo(report.text_table())
    click.echo(f"report: {out}\ncsv: {out.with_suffix('.csv')}\nfigures: {fig1}, {fig2}")


@main.command()
@click.option("--ckpt", "ckpt_paths", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--sessions", type=int, default=10000, show_default=True)
@click.option("--click-model", "click_model_name", type=click.Choice(["oracle", "noisy-oracle"]),
              default="oracle", show_default=True)
@click.option("--seed", type=int, default=11, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def simulate(ckpt_paths, corpus_dir, sessions, click_model_name, seed, out_path) -> None:
    """Run the seeded online simulation (CTR / THA) per checkpoint."""
    from .evaluation import ClickModel, simulate_online
    from .figures import plot_online

    corpus = load_corpus(corpus_dir)
    methods = {Path(p).stem: load_checkpoint(p) for p in ckpt_paths}
    report = simulate_online(methods, corpus, ClickModel(click_model_name), sessions, seed)
    click.echo(report.to_json())
    if out_path:
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.to_json(), encoding="utf-8")
        _write_csv(out.with_suffix(".csv"), report.csv_rows())
        fig = plot_online(report, out.with_suffix(".png"))
        click.echo(f"report: {out}\ncsv: {out.with_suffix('.csv')}\nfigure: {fig}")


def _build_engine(ckpt_path: str, inventory_path: str, log_dir: str | None = None):
    from .service import ClarificationEngine

    inv = load_inventory(inventory_path)
    model = load_checkpoint(ckpt_path)
    return ClarificationEngine(
        inv, model, checkpoint_id=Path(ckpt_path).stem, log_dir=log_dir
    )


@main.command()
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--inventory", "inventory_path", type=click.Path(exists=True), required=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--log-dir", type=click.Path(), default=None)
def serve(ckpt_path: str, inventory_path: str, port: int, host: str, log_dir: str | None) -> None:
    """Run the clarification HTTP service."""
    import uvicorn

    from .service import create_app

    engine = _build_engine(ckpt_path, inventory_path, log_dir)
    uvicorn.run(create_app(engine), host=host, port=port)


@main.command()
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--inventory", "inventory_path", type=click.Path(exists=True), required=True)
def demo(ckpt_path: str, inventory_path: str) -> None:
    """Interactive terminal session against the same engine the service uses."""
    engine = _build_engine(ckpt_path, inventory_path)
    click.echo("type an ambiguous question (empty line to quit)")
    while True:
        query = click.prompt("you", default="", show_default=False)
        if not query.strip():
            break
        session_id, labels, _ = engine.start_session(query)
        for i, lab in enumerate(labels, 1):
            click.echo(f"  {i}. {lab.phrase}")
        click.echo("  0. none of the above")
        pick = click.prompt("pick a label", type=int, default=0)
        choice = labels[pick - 1].id if 1 <= pick <= len(labels) else None
        intents = engine.select_label(session_id, choice)
        for i, intent in enumerate(intents, 1):
            click.echo(f"  {i}. {intent.text}")
        pick = click.prompt("pick an intent (0 transfers to an agent)", type=int, default=0)
        if 1 <= pick <= len(intents):
            engine.resolve(session_id, intent_id=intents[pick - 1].id)
            click.echo(f"answer: {intents[pick - 1].answer}")
        else:
            engine.resolve(session_id, transfer=True)
            click.echo("transferred to a human agent")
        stats = engine.metrics()
        click.echo(f"[metrics] ctr={stats['ctr']} tha={stats['tha']}")


if __name__ == "__main__":
    main()
