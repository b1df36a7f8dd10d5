"""Operator command-line interface.

Subcommands cover the whole pipeline: fuzzify, build-dag, expand-dag,
validate-dag, enumerate, gen-dialogues, emit-samples, score, simulate,
rollout, eval, serve, stats. Exit codes: 0 success, 1 pipeline error,
2 usage error. Data goes to files or stdout; logs go to stderr as
line-delimited JSON events.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import cdag, config as cfg, metrics, pipeline, rollout as rollout_mod
from .errors import ClarienvError, UsageError
from .providers import (
    EchoUserProvider,
    HashedTokenEmbedder,
    RemoteChatProvider,
    ScriptedChatProvider,
    make_embedder,
)
from .reward import (
    PenaltyBreakdown,
    RewardConfig,
    content_score,
    format_score,
    turn_reward,
)
from .simulator import create_episode, episode_transcript, is_done, step
from .traversal import (
    IntentSet,
    enumerate_trajectories,
    trajectory_from_json,
    trajectory_to_json,
)


def log_event(**fields) -> None:
    print(json.dumps(fields, ensure_ascii=False), file=sys.stderr)


def read_jsonl(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_jsonl(path: str | None, rows: list[dict]) -> None:
    text = "\n".join(json.dumps(r, ensure_ascii=False) for r in rows)
    if rows:
        text += "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def chat_provider(values: dict[str, str], role: str, script: str | None):
    """Chat provider for a role: remote when configured, else scripted from a
    file, else (user role only) the deterministic echo user."""
    provider_conf = cfg.provider_config(values, role)
    if provider_conf.kind == "remote-http":
        return RemoteChatProvider(provider_conf)
    if script:
        return ScriptedChatProvider.from_file(script)
    if role == "user":
        return EchoUserProvider()
    raise UsageError(
        f"role {role!r} needs either a remote provider config or --script"
    )


def load_graphs(graphs_dir: str) -> dict[str, cdag.CDag]:
    graphs = {}
    for name in sorted(os.listdir(graphs_dir)):
        if not name.endswith(".json"):
            continue
        task_id = name.rsplit(".cdag.json", 1)[0] if name.endswith(".cdag.json") \
            else name.rsplit(".json", 1)[0]
        with open(os.path.join(graphs_dir, name), encoding="utf-8") as fh:
            graphs[task_id] = cdag.parse_cdag(fh.read())
    if not graphs:
        raise UsageError(f"no graph files found in {graphs_dir!r}")
    return graphs


def cmd_fuzzify(args, values) -> int:
    chat = chat_provider(values, "construct", args.script)
    rows = []
    for seed_row in read_jsonl(args.seeds):
        rubrics = seed_row.get("rubrics", "")
        if not isinstance(rubrics, str):
            rubrics = json.dumps(rubrics, ensure_ascii=False)
        task = pipeline.SeedTask(
            task_id=str(seed_row["id"]),
            original_query=seed_row["prompt"],
            rubrics=rubrics,
        )
        result = pipeline.fuzzify(task, chat)
        rows.append({
            "id": task.task_id,
            "simple_query": result.simple_query,
            "shallow_intents": [r.text for r in result.shallow_intents],
            "language": task.language,
        })
        log_event(event="fuzzify", task_id=task.task_id,
                  intents=len(result.shallow_intents))
    write_jsonl(args.out, rows)
    return 0


def cmd_build_dag(args, values) -> int:
    chat = chat_provider(values, "construct", args.script)
    os.makedirs(args.out_dir, exist_ok=True)
    for row in read_jsonl(args.fuzzified):
        if not row["simple_query"]:
            log_event(event="build-dag", task_id=row["id"], skipped="already minimal")
            continue
        intents = [pipeline.IntentRecord("shallow", t) for t in row["shallow_intents"]]
        graph = pipeline.build_base_graph(row["simple_query"], intents, chat)
        path = os.path.join(args.out_dir, f"{row['id']}.cdag.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(cdag.serialize_cdag(graph))
        log_event(event="build-dag", task_id=row["id"], nodes=len(graph.nodes))
    return 0


def cmd_expand_dag(args, values) -> int:
    chat = chat_provider(values, "construct", args.script)
    graphs = load_graphs(args.graphs)
    seeds = {str(r["id"]): r for r in read_jsonl(args.seeds)}
    fuzzified = {str(r["id"]): r for r in read_jsonl(args.fuzzified)}
    os.makedirs(args.out_dir, exist_ok=True)
    for task_id, graph in graphs.items():
        seed_row = seeds.get(task_id)
        if seed_row is None:
            raise UsageError(f"no seed entry for graph {task_id!r}")
        rubrics = seed_row.get("rubrics", "")
        if not isinstance(rubrics, str):
            rubrics = json.dumps(rubrics, ensure_ascii=False)
        task = pipeline.SeedTask(task_id, seed_row["prompt"], rubrics)
        deep = pipeline.derive_deep_intents(task, chat)
        shallow = [
            pipeline.IntentRecord("shallow", t)
            for t in fuzzified.get(task_id, {}).get("shallow_intents", [])
        ]
        expanded = pipeline.expand_graph(graph, shallow + deep, chat)
        path = os.path.join(args.out_dir, f"{task_id}.cdag.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(cdag.serialize_cdag(expanded))
        log_event(event="expand-dag", task_id=task_id, nodes=len(expanded.nodes))
    return 0


def cmd_validate_dag(args, values) -> int:
    with open(args.graph, encoding="utf-8") as fh:
        graph = cdag.parse_cdag(fh.read())
    report = cdag.validate_cdag(graph)
    for finding in report.findings:
        print(f"{finding.severity}: [{finding.rule}] {finding.message}")
    print(f"{len(report.errors)} errors, {len(report.warnings)} warnings")
    return 0 if report.ok else 1


def cmd_enumerate(args, values) -> int:
    with open(args.graph, encoding="utf-8") as fh:
        graph = cdag.parse_cdag(fh.read())
    mode = args.mode or values["enumerate.mode"]
    cap = args.cap or int(values["enumerate.cap"])
    trajectories = enumerate_trajectories(
        graph, cap=cap, mode=mode, graph_id=args.graph_id or args.graph
    )
    write_jsonl(args.out, [trajectory_to_json(t) for t in trajectories])
    return 0


def cmd_gen_dialogues(args, values) -> int:
    chat = chat_provider(values, "user", args.script)
    graphs = load_graphs(args.graphs)
    fuzzified = {str(r["id"]): r for r in read_jsonl(args.fuzzified)}
    mode = values["enumerate.mode"]
    cap = int(values["enumerate.cap"])
    dialogue_rows, trajectory_rows = [], []
    for task_id, graph in graphs.items():
        simple_query = fuzzified[task_id]["simple_query"]
        trajectories = enumerate_trajectories(graph, cap=cap, mode=mode,
                                              graph_id=task_id)
        for i, trajectory in enumerate(trajectories):
            trajectory_id = f"{task_id}-t{i}"
            dialogue = pipeline.synthesize_dialogue(
                simple_query, trajectory, chat,
                task_id=task_id, trajectory_id=trajectory_id,
            )
            row = trajectory_to_json(trajectory)
            row["trajectory_id"] = trajectory_id
            trajectory_rows.append(row)
            dialogue_rows.append({
                "task_id": task_id,
                "trajectory_id": trajectory_id,
                "simple_query": simple_query,
                "turns": [
                    {"question": t.question, "answer": t.answer}
                    for t in dialogue.turns
                ],
            })
        log_event(event="gen-dialogues", task_id=task_id,
                  trajectories=len(trajectories))
    write_jsonl(args.out, dialogue_rows)
    if args.trajectories_out:
        write_jsonl(args.trajectories_out, trajectory_rows)
    return 0


def _dialogue_from_row(row: dict) -> pipeline.Dialogue:
    return pipeline.Dialogue(
        task_id=row["task_id"],
        trajectory_id=row["trajectory_id"],
        simple_query=row["simple_query"],
        turns=tuple(
            pipeline.DialogueTurn(t["question"], t["answer"]) for t in row["turns"]
        ),
    )


def cmd_emit_samples(args, values) -> int:
    embedder = make_embedder(cfg.provider_config(values, "embedding"))
    graphs = load_graphs(args.graphs)
    trajectories = {
        r["trajectory_id"]: trajectory_from_json(r)
        for r in read_jsonl(args.trajectories)
    }
    rows = []
    for dlg_row in read_jsonl(args.dialogues):
        dialogue = _dialogue_from_row(dlg_row)
        graph = graphs[dialogue.task_id]
        trajectory = trajectories[dialogue.trajectory_id]
        samples = pipeline.emit_turn_samples(
            dialogue, graph, trajectory,
            embedder=embedder,
            reward_config=cfg.reward_config(values, stage="I"),
        )
        rows.extend(s.to_json() for s in samples)
    write_jsonl(args.out, rows)
    log_event(event="emit-samples", samples=len(rows))
    return 0


def rescore_sample(sample: pipeline.TurnSample, embedder, beta: float, gamma: float):
    """Recompute the reward of a stored sample from its own fields."""
    if sample.question is None or sample.reward is None:
        return None
    stored = sample.reward
    config = RewardConfig(beta=beta, gamma=gamma, stage=stored.stage)
    targets = IntentSet(intents=sample.target_intents, node_ids=())
    content = (
        content_score(sample.question, targets, embedder)
        if sample.target_intents
        else stored.content
    )
    penalties = PenaltyBreakdown(
        rep=stored.penalties.rep,
        inv=stored.penalties.inv,
        div=stored.penalties.div,
    )
    return turn_reward(content, format_score(sample.question), penalties, config)


def cmd_score(args, values) -> int:
    embedder = make_embedder(cfg.provider_config(values, "embedding"))
    beta = float(values["reward.beta"])
    gamma = float(values["reward.gamma"])
    checked, mismatches, rows = 0, [], []
    for row in read_jsonl(args.samples):
        sample = pipeline.TurnSample.from_json(row)
        recomputed = rescore_sample(sample, embedder, beta, gamma)
        if recomputed is None:
            continue
        checked += 1
        row["recomputed_reward"] = recomputed.to_json()
        rows.append(row)
        if sample.reward and abs(recomputed.total - sample.reward.total) > 1e-12:
            mismatches.append(sample.sample_id)
    if args.out:
        write_jsonl(args.out, rows)
    report = {"checked": checked, "mismatches": mismatches}
    print(json.dumps(report, ensure_ascii=False))
    return 0 if not mismatches else 1


def _read_text_list(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        content = fh.read().strip()
    if content.startswith("["):
        return json.loads(content)
    return [line.strip() for line in content.splitlines() if line.strip()]


def cmd_simulate(args, values) -> int:
    embedder = make_embedder(cfg.provider_config(values, "embedding"))
    user_chat = chat_provider(values, "user", args.user_script)
    judge_chat = None
    sim_conf = cfg.simulator_config(values, stage=args.stage)
    intents = _read_text_list(args.intents)
    questions = _read_text_list(args.questions)
    episode = create_episode(
        args.query, intents, sim_conf, embedder,
        user_chat=user_chat, judge_chat=judge_chat,
        episode_id=args.episode_id,
    )
    for question in questions:
        if is_done(episode):
            break
        outcome = step(episode, question)
        log_event(event="step", turn=outcome.turn, status=outcome.status)
    write_jsonl(args.out, episode_transcript(episode))
    return 0


def cmd_rollout(args, values) -> int:
    embedder = make_embedder(cfg.provider_config(values, "embedding"))
    policy = chat_provider(values, "policy", args.policy_script)
    user_chat = chat_provider(values, "user", args.user_script)
    graphs = load_graphs(args.graphs)
    trajectories = {
        r["trajectory_id"]: trajectory_from_json(r)
        for r in read_jsonl(args.trajectories)
    }
    inputs = []
    for dlg_row in read_jsonl(args.dialogues):
        dialogue = _dialogue_from_row(dlg_row)
        inputs.append(rollout_mod.RolloutInput(
            dialogue=dialogue,
            graph=graphs[dialogue.task_id],
            trajectory=trajectories[dialogue.trajectory_id],
        ))
    prefix_lengths = (
        tuple(int(x) for x in args.prefix_lengths.split(","))
        if args.prefix_lengths else None
    )
    spec = rollout_mod.RolloutSpec(
        policy=policy,
        rollouts_per_query=args.n or int(values["rollout.n"]),
        prefix_lengths=prefix_lengths,
        simulator=cfg.simulator_config(values, stage="II"),
    )
    results = rollout_mod.run_rollouts(spec, inputs, embedder, user_chat)
    samples = []
    by_task = {item.dialogue.task_id: item for item in inputs}
    for result in results:
        item = by_task[result.task_id]
        samples.extend(rollout_mod.decompose(
            result, item.graph, item.trajectory, embedder,
            match_threshold=float(values["simulator.tau_rel"]),
            simple_query=item.dialogue.simple_query,
        ))
    if args.mix_with:
        stage1 = [pipeline.TurnSample.from_json(r) for r in read_jsonl(args.mix_with)]
        samples = rollout_mod.mix(stage1, samples, seed=int(values["seed"]))
    write_jsonl(args.out, [s.to_json() for s in samples])
    log_event(event="rollout", trajectories=len(results), samples=len(samples))
    return 0


def cmd_eval(args, values) -> int:
    embedder = make_embedder(cfg.provider_config(values, "embedding"))
    report = metrics.MetricReport()
    if args.samples:
        scored = []
        for row in read_jsonl(args.samples):
            reward = row.get("reward")
            if reward:
                scored.append(reward)
        report.quality_score = metrics.quality_score(scored)
    if args.episodes:
        threshold = float(values["metrics.threshold"])
        per = []
        for row in read_jsonl(args.episodes):
            pr = metrics.intent_pr(
                row["questions"], row["intents"], embedder, threshold
            )
            per.append({"episode_id": row.get("episode_id", ""), **pr.to_json()})
        report.per_episode = per
        n = len(per)
        precision = sum(r["precision"] for r in per) / n
        recall = sum(r["recall"] for r in per) / n
        report.intent = metrics.PrecisionRecall(
            precision, recall, metrics.harmonic_f1(precision, recall)
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, ensure_ascii=False, indent=2)
    print(metrics.format_report_table(report))
    return 0


def cmd_serve(args, values) -> int:
    import uvicorn

    from .service import create_app

    embedder = make_embedder(cfg.provider_config(values, "embedding"))
    user_chat = chat_provider(values, "user", args.user_script)
    summary_chat = None
    summary_conf = cfg.provider_config(values, "summary")
    if summary_conf.kind == "remote-http":
        summary_chat = RemoteChatProvider(summary_conf)
    elif args.summary_script:
        summary_chat = ScriptedChatProvider.from_file(args.summary_script)
    app = create_app(
        embedder,
        user_chat,
        summary_chat=summary_chat,
        simulator_config=cfg.simulator_config(values, stage="II"),
        auth_token=values.get("service.auth_token"),
        transcript_log=values.get("service.transcript_log"),
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def graph_depth(graph: cdag.CDag) -> int:
    """Longest node-path length from any start node, in nodes."""
    memo: dict[str, int] = {}

    def depth(nid: str) -> int:
        if nid in memo:
            return memo[nid]
        children = {
            t for opt in graph.nodes[nid].options for t in opt.next_node_ids
        }
        memo[nid] = 1 + max((depth(c) for c in children), default=0)
        return memo[nid]

    return max((depth(s) for s in graph.start_node_ids), default=0)


def cmd_stats(args, values) -> int:
    graphs = load_graphs(args.graphs)
    per_graph = []
    for task_id, graph in graphs.items():
        trajectories = enumerate_trajectories(
            graph, cap=int(values["enumerate.cap"]),
            mode=values["enumerate.mode"], graph_id=task_id,
        )
        per_graph.append({
            "task_id": task_id,
            "nodes": len(graph.nodes),
            "depth": graph_depth(graph),
            "trajectories": len(trajectories),
        })
    depths = [g["depth"] for g in per_graph]
    counts = [g["trajectories"] for g in per_graph]
    summary = {
        "graphs": len(per_graph),
        "depth": {"min": min(depths), "max": max(depths),
                  "avg": sum(depths) / len(depths)},
        "trajectories": {"min": min(counts), "max": max(counts),
                         "avg": sum(counts) / len(counts)},
        "per_graph": per_graph,
    }
    print(json.dumps(summary, ensure_ascii=False, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clarienv",
        description="Clarification-environment toolkit: data construction, "
                    "rewards, simulation, and serving.",
    )
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--set", action="append", default=[], dest="overrides",
                        metavar="KEY=VALUE", help="override a config key")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuzzify", help="simplify seed queries into simple "
                                       "queries plus shallow intents")
    p.add_argument("--seeds", required=True)
    p.add_argument("--script", help="scripted chat replies (deterministic mode)")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_fuzzify)

    p = sub.add_parser("build-dag", help="build base clarification graphs")
    p.add_argument("--fuzzified", required=True)
    p.add_argument("--script")
    p.add_argument("-o", "--out-dir", required=True)
    p.set_defaults(func=cmd_build_dag)

    p = sub.add_parser("expand-dag", help="expand graphs with deep intents")
    p.add_argument("--graphs", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--fuzzified", required=True)
    p.add_argument("--script")
    p.add_argument("-o", "--out-dir", required=True)
    p.set_defaults(func=cmd_expand_dag)

    p = sub.add_parser("validate-dag", help="validate a graph document")
    p.add_argument("graph")
    p.set_defaults(func=cmd_validate_dag)

    p = sub.add_parser("enumerate", help="enumerate trajectories of one graph")
    p.add_argument("graph")
    p.add_argument("--mode", choices=["structural", "full"])
    p.add_argument("--cap", type=int)
    p.add_argument("--graph-id")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("gen-dialogues", help="synthesize offline dialogues")
    p.add_argument("--graphs", required=True)
    p.add_argument("--fuzzified", required=True)
    p.add_argument("--script")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--trajectories-out")
    p.set_defaults(func=cmd_gen_dialogues)

    p = sub.add_parser("emit-samples", help="emit stage-I turn samples")
    p.add_argument("--dialogues", required=True)
    p.add_argument("--graphs", required=True)
    p.add_argument("--trajectories", required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_emit_samples)

    p = sub.add_parser("score", help="recompute stored sample rewards")
    p.add_argument("--samples", required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", help="run scripted questions through an episode")
    p.add_argument("--query", required=True)
    p.add_argument("--intents", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--user-script")
    p.add_argument("--stage", choices=["I", "II"], default="II")
    p.add_argument("--episode-id", default="episode-0")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rollout", help="stage-II rollouts with teacher forcing")
    p.add_argument("--dialogues", required=True)
    p.add_argument("--graphs", required=True)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--policy-script")
    p.add_argument("--user-script")
    p.add_argument("--prefix-lengths", help="comma-separated, e.g. 0,1,2")
    p.add_argument("-n", type=int, dest="n")
    p.add_argument("--mix-with", help="stage-I samples to mix in")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("eval", help="metrics over samples and episodes")
    p.add_argument("--samples")
    p.add_argument("--episodes")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP environment service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--user-script")
    p.add_argument("--summary-script")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("stats", help="depth and trajectory-count distributions")
    p.add_argument("--graphs", required=True)
    p.set_defaults(func=cmd_stats)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        values = cfg.load_config(args.config, args.overrides)
        return args.func(args, values)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ClarienvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
