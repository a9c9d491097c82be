#!/usr/bin/env python3
"""Build the scripted backend fixture that answers every agent prompt of a
dataset with its ground truth.

usage: make_golden_script.py dataset.jsonl script.json
"""
import json
import sys


def arg(a):
    return f'"{a}"' if "'" in a else f"'{a}'"


def call(skill, *args):
    return f"{skill}({', '.join(arg(a) for a in args)})"


def block(obj):
    ref, src, dst = obj["ref"], obj["source"], obj["destination"]
    steps = [call("move_to", ref, src), call("pick_up", ref, src)]
    if dst != "held":
        steps += [call("move_to", ref, dst), call("put", ref, dst)]
    return steps


def numbered(lines):
    return "\n".join(f"{i}. {line}" for i, line in enumerate(lines, 1))


def main(dataset, out):
    tasks = [json.loads(line) for line in open(dataset) if line.strip()]
    rules, llp = [], {}
    for t in tasks:
        objs = t["objects"]
        collective = t["metadata"].get("collective")
        subtasks = [t["instruction"]] if len(objs) == 1 and not collective else t["gt_subtasks"]
        assert len(subtasks) == len(objs), t["id"]
        if collective:
            rules.append({"system_contains": "object lookup", "contains": f"Request: {t['instruction']}\n",
                          "response": collective})
        rules.append({"system_contains": "high-level planner", "contains": f"Instruction: {t['instruction']}\n",
                      "response": numbered(subtasks)})
        steps = []
        for sub, obj in zip(subtasks, objs):
            plan = numbered(block(obj) + ["done()"])
            assert llp.get(sub, plan) == plan, sub
            llp[sub] = plan
            steps += block(obj)
        assert numbered(steps + ["done()"]) == t["gt_plan"], t["id"]
    for sub, plan in llp.items():
        rules.append({"system_contains": "low-level planner", "contains": f"Task: {sub}\nPlan:", "response": plan})
    rules.append({"system_contains": "object lookup", "response": "none"})
    rules.append({"system_contains": "feasibility checker", "response": "Feasible"})
    with open(out, "w") as f:
        json.dump({"name": "golden-smoke", "rules": rules}, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main(*sys.argv[1:3])
