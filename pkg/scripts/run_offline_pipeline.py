#!/usr/bin/env python3
"""Run the full offline construction pipeline with scripted providers.

Writes seed tasks and scripted chat replies into a working directory, then
drives the CLI end to end: fuzzify -> build-dag -> expand-dag -> gen-dialogues
-> emit-samples -> score. No network access is needed; the scripted replies
stand in for the construction model and the deterministic echo user plays the
human. Useful as a smoke test and as a template for wiring real providers.

Usage: python scripts/run_offline_pipeline.py [workdir]
"""

import json
import os
import sys

from clarienv.cli import run

TASKS = [
    {
        "id": "demo-1",
        "topic": "consulting",
        "prompt": "Research consulting firms with budget detail and vendor comparisons",
        "rubrics": "rubric: cover budgets and vendors",
    },
    {
        "id": "demo-2",
        "topic": "energy",
        "prompt": "Research energy markets with regional growth and policy analysis",
        "rubrics": "rubric: cover regions and policy",
    },
]


def simple_query(task):
    return f"Research {task['topic']} developments"


def graph_doc(task):
    topic = task["topic"]
    return {
        "root_node": simple_query(task),
        "start_node_ids": ["q1"],
        "nodes": {
            "q1": {
                "id": "q1",
                "text": f"What {topic} scope do you want covered?",
                "options": [
                    {"text": f"broad {topic} scope", "next_node_id": ["q2"]},
                    {"text": f"narrow {topic} scope", "next_node_id": ["q2"]},
                ],
            },
            "q2": {
                "id": "q2",
                "text": f"Which {topic} sources should be compared?",
                "options": [
                    {"text": f"primary {topic} sources", "next_node_id": []},
                    {"text": f"secondary {topic} sources", "next_node_id": []},
                ],
            },
        },
    }


def write_scripts(root):
    fuzzify = [
        {"expect": t["prompt"], "response": json.dumps({
            "simple_query": simple_query(t),
            "missing_intent": [
                f"I want {t['topic']} scope covered in depth",
                f"I want {t['topic']} sources compared",
            ],
        })}
        for t in TASKS
    ]
    build = [
        {"expect": simple_query(t), "response": json.dumps(graph_doc(t))}
        for t in TASKS
    ]
    expand = []
    for t in TASKS:
        expand.append({"expect": t["rubrics"], "response": json.dumps({
            "comprehensiveness": [f"I want every {t['topic']} angle covered"],
            "insight": [f"The report needs {t['topic']} implications explained"],
        })})
        expand.append({
            "expect": f"What {t['topic']} scope do you want covered?",
            "response": json.dumps(graph_doc(t)),
        })
    for name, payload in [("fuzzify", fuzzify), ("build", build), ("expand", expand)]:
        with open(os.path.join(root, f"{name}_script.json"), "w") as fh:
            json.dump(payload, fh)


def main():
    root = sys.argv[1] if len(sys.argv) > 1 else "out"
    os.makedirs(root, exist_ok=True)
    seeds = os.path.join(root, "seeds.jsonl")
    with open(seeds, "w") as fh:
        for task in TASKS:
            fh.write(json.dumps(task) + "\n")
    write_scripts(root)

    p = lambda name: os.path.join(root, name)
    steps = [
        ["fuzzify", "--seeds", seeds, "--script", p("fuzzify_script.json"),
         "-o", p("fuzzified.jsonl")],
        ["build-dag", "--fuzzified", p("fuzzified.jsonl"),
         "--script", p("build_script.json"), "-o", p("graphs")],
        ["expand-dag", "--graphs", p("graphs"), "--seeds", seeds,
         "--fuzzified", p("fuzzified.jsonl"),
         "--script", p("expand_script.json"), "-o", p("expanded")],
        ["gen-dialogues", "--graphs", p("expanded"),
         "--fuzzified", p("fuzzified.jsonl"),
         "-o", p("dialogues.jsonl"), "--trajectories-out", p("trajectories.jsonl")],
        ["emit-samples", "--dialogues", p("dialogues.jsonl"),
         "--graphs", p("expanded"), "--trajectories", p("trajectories.jsonl"),
         "-o", p("samples.jsonl")],
        ["score", "--samples", p("samples.jsonl")],
        ["stats", "--graphs", p("expanded")],
    ]
    for argv in steps:
        print(f"$ clarienv {' '.join(argv)}")
        code = run(argv)
        if code != 0:
            print(f"step {argv[0]} failed with exit code {code}", file=sys.stderr)
            sys.exit(code)
    print(f"artifacts written under {root}/")


if __name__ == "__main__":
    main()
