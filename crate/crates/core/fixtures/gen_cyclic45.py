#!/usr/bin/env python3
"""Writes cyclic45.json: a 45-node lung-style triage diagram with loops.

Eight decision stages; each has two criteria branches that rejoin at the
next stage and an early exit. Two branches loop back to an earlier stage.
Run from this directory; output is deterministic.
"""
import json

STAGE_TEXT = [
    ("Haemoptysis", "Aged 40 or over"),
    ("Chest x-ray", "Weight loss"),
    ("Aged 60 or over", "Platelet count > 400 10*9/L"),
    ("Consider further investigation", "Dysphagia"),
    ("CT chest", "Haemoglobin < 110 g/L"),
    ("Unexplained weight loss", "Aged 50 or over and haemoptysis"),
    ("Iron deficiency anaemia", "Platelet count >= 450 10*9/L"),
    ("Persistent symptoms despite treatment", "Chest x-ray and weight loss"),
]


def bbox(i):
    return {"x": round((i % 6) / 6, 4), "y": round((i // 6) / 8, 4), "w": 0.15, "h": 0.1}


nodes, edges = [], []


def node(nid, kind, text, visual=None):
    n = {"id": nid, "node_type": kind, "bbox": bbox(len(nodes)), "text": text}
    if visual:
        n["visual"] = visual
    nodes.append(n)


node("start", "start_block", "Adult with respiratory symptoms")
for i, (a, b) in enumerate(STAGE_TEXT, start=1):
    node(f"d{i}", "decision_diamond", f"Aged {16 + 2 * i} or over")
    node(f"a{i}", "criteria_block", a)
    node(f"b{i}", "criteria_block", b)
    node(f"e{i}", "end_block", f"Safety-net and review in primary care (stage {i})")
urgent = {"background_color": "red", "font_weight": "bold", "text_case": "upper"}
node("refer", "end_block", "REFER URGENTLY FOR SUSPECTED LUNG CANCER", urgent)
node("xr", "action_block", "Arrange chest x-ray within 2 weeks")
node("ct", "process_block", "Request CT chest")
node("rv", "action_block", "Repeat assessment after 3 weeks")
node("note1", "annotation", "Smoking history increases pre-test probability")
node("note2", "annotation", "See local imaging protocol")
node("routine", "end_block", "Routine referral to respiratory clinic")
node("x1", "criteria_block", "Abnormal chest x-ray")
node("x2", "criteria_block", "Not haemoptysis")
node("x3", "other", "Check previous imaging")
node("x4", "action_block", "Discuss at lung multidisciplinary meeting")
node("note3", "annotation", "Thresholds follow the local laboratory reference ranges")
assert len(nodes) == 45, len(nodes)

edges.append(("start", "d1"))
for i in range(1, 9):
    edges += [(f"d{i}", f"a{i}", "yes"), (f"d{i}", f"b{i}", "no"), (f"d{i}", f"e{i}", "neither")]
    nxt = f"d{i + 1}" if i < 8 else "refer"
    edges += [(f"a{i}", nxt), (f"b{i}", nxt)]
edges += [
    ("b3", "xr"), ("xr", "d2"),          # loop back to stage 2
    ("a6", "rv"), ("rv", "d5"),          # loop back to stage 5
    ("b8", "ct"), ("ct", "x1"), ("x1", "routine"), ("x1", "x2"), ("x2", "x3"), ("x3", "x4"), ("x4", "refer"),
    ("note1", "d1"),
]
edges = [
    {"source": e[0], "target": e[1], **({"label": e[2]} if len(e) > 2 else {})}
    for e in edges
]

doc = {
    "pathway_name": "Synthetic Lung Triage",
    "source_document": "fixtures/cyclic45.pdf",
    "pages": 3,
    "nodes": nodes,
    "edges": edges,
}
with open("cyclic45.json", "w") as f:
    json.dump(doc, f, indent=2)
    f.write("\n")
