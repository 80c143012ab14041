#!/usr/bin/env python3
"""Regenerate crates/core/assets/shots.json, the few-shot examples shown
before every task. The programs are tutorial-style and do not come from
the evaluation corpus."""
import json
import os

MIN = """class Minimum {
{specs}    public static int min(int a, int b) {
        if (a <= b) {
            return a;
        } else {
            return b;
        }
    }
}
"""

COUNT = """class CountPositive {
{mspecs}    public static int countPositive(int[] a) {
        int count = 0;
{lspecs}        for (int i = 0; i < a.length; i++) {
            if (a[i] > 0) {
                count++;
            }
        }
        return count;
    }
}
"""


def spec_lines(clauses, depth):
    return "".join("    " * depth + "//@ " + c + "\n" for c in clauses)


def min_prog(clauses):
    return MIN.replace("{specs}", spec_lines(clauses, 1))


def count_prog(mclauses, lclauses):
    return COUNT.replace("{mspecs}", spec_lines(mclauses, 1)).replace("{lspecs}", spec_lines(lclauses, 2))


MIN_GT = ["ensures \\result <= a && \\result <= b;", "ensures \\result == a || \\result == b;"]
COUNT_M = ["ensures 0 <= \\result && \\result <= a.length;"]
COUNT_L = ["loop_invariant 0 <= i && i <= a.length;", "loop_invariant 0 <= count && count <= i;"]

shots = {
    "judgement": [
        {
            "payload": {
                "task": "judgement",
                "program": min_prog(["ensures \\result <= a && \\result <= b;"]),
                "anchor": {"Method": "min"},
                "candidate": "ensures \\result <= a && \\result <= b;",
            },
            "reply": "true",
        },
        {
            "payload": {
                "task": "judgement",
                "program": count_prog([], ["loop_invariant 0 <= count && count < i;"]),
                "anchor": {"Loop": 1},
                "candidate": "loop_invariant 0 <= count && count < i;",
            },
            "reply": "false",
        },
    ],
    "selection": [
        {
            "payload": {
                "task": "selection",
                "program": MIN.replace("{specs}", "    //@ <SPEC>\n"),
                "anchor": {"Method": "min"},
                "kind": "Ensures",
                "options": [
                    {"label": "A", "clause": "ensures \\result >= a && \\result <= b;"},
                    {"label": "B", "clause": "ensures true;"},
                    {"label": "C", "clause": "ensures \\result <= a && \\result <= b;"},
                    {"label": "D", "clause": "ensures \\result < a || \\result <= b;"},
                ],
            },
            "reply": "C",
        },
        {
            "payload": {
                "task": "selection",
                "program": COUNT.replace("{mspecs}", "").replace("{lspecs}", "        //@ <SPEC>\n"),
                "anchor": {"Loop": 1},
                "kind": "LoopInvariant",
                "options": [
                    {"label": "A", "clause": "loop_invariant 0 <= count && count <= i;"},
                    {"label": "B", "clause": "loop_invariant 0 <= count && count >= i;"},
                    {"label": "C", "clause": "loop_invariant 0 < count && count <= i;"},
                    {"label": "D", "clause": "loop_invariant 0 <= i || count <= i;"},
                ],
            },
            "reply": "A",
        },
    ],
    "infilling": [
        {
            "payload": {
                "task": "infilling",
                "program": min_prog(["ensures \\result <= a && \\result <= b;", "ensures \\result == a || \\result == <MASK>;"]),
                "masked_clause": "ensures \\result == a || \\result == <MASK>;",
                "line": 3,
            },
            "reply": "```java\nb\n```",
        },
        {
            "payload": {
                "task": "infilling",
                "program": count_prog(COUNT_M, ["loop_invariant 0 <= i && i <= <MASK>;", COUNT_L[1]]),
                "masked_clause": "loop_invariant 0 <= i && i <= <MASK>;",
                "line": 5,
            },
            "reply": "```java\na.length\n```",
        },
    ],
    "generation": [
        {
            "payload": {
                "task": "generation",
                "program": min_prog([]),
                "required": [
                    {"anchor": {"Method": "min"}, "kind": "Requires"},
                    {"anchor": {"Method": "min"}, "kind": "Ensures"},
                ],
            },
            "reply": "```java\n" + min_prog(["requires true;"] + MIN_GT) + "```",
        },
        {
            "payload": {
                "task": "generation",
                "program": count_prog([], []),
                "required": [
                    {"anchor": {"Method": "countPositive"}, "kind": "Requires"},
                    {"anchor": {"Method": "countPositive"}, "kind": "Ensures"},
                    {"anchor": {"Loop": 1}, "kind": "LoopInvariant"},
                ],
            },
            "reply": "```java\n" + count_prog(["requires true;"] + COUNT_M, COUNT_L) + "```",
        },
    ],
}

if __name__ == "__main__":
    out = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "assets", "shots.json")
    with open(out, "w") as f:
        json.dump(shots, f, indent=2)
        f.write("\n")
