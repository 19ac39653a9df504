"""Drive the HTTP session service end to end, in process.

Writes a small course to a temporary directory, boots the app against it,
and then walks the full client protocol: list strategies, open a session,
answer through mixed outcomes including a skip and an "I don't know",
read the summary, and trigger a retrain. The same endpoints serve the
browser frontend; this script is the curl-level view of them.
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from learnpath.service import ServiceConfig, create_app

BANK_CSV = """id,text,opt1,opt2,opt3,opt4,correct_index,difficulty,teacher_level,keywords,topic
q01,What is 2+3?,4,5,6,7,1,basic,1,sums,arithmetic
q02,What is 7+6?,12,14,13,11,2,basic,1,sums,arithmetic
q03,What is 9-4?,5,4,6,3,0,basic,1,sums,arithmetic
q04,What is 6*7?,42,36,48,44,0,basic,2,products,arithmetic
q05,What is 8*9?,81,72,64,79,1,basic,2,products,arithmetic
q06,What is 12*12?,124,154,144,134,2,difficult,3,products,arithmetic
q07,What is 84/7?,14,12,16,13,1,difficult,3,products;sums,arithmetic
"""

NODES_CSV = """concept_id,question_ids
addition,q01;q02;q03
multiplication,q04;q05;q06;q07
"""

ARCS_CSV = """from,to,weight
addition,multiplication,1.0
"""


def write_course(root: Path) -> ServiceConfig:
    (root / "bank.csv").write_text(BANK_CSV, encoding="utf-8")
    (root / "nodes.csv").write_text(NODES_CSV, encoding="utf-8")
    (root / "arcs.csv").write_text(ARCS_CSV, encoding="utf-8")
    return ServiceConfig(bank_path=str(root / "bank.csv"),
                         nodes_path=str(root / "nodes.csv"),
                         arcs_path=str(root / "arcs.csv"),
                         data_dir=str(root / "data"))


def show(title: str, payload) -> None:
    print(f"--- {title}")
    print(json.dumps(payload, indent=2)[:400])
    print()


def correct_choices() -> dict[str, int]:
    """The answer key, read from the course we wrote ourselves.

    The API never sends correct_index to clients, so a deliberate wrong
    answer needs the author's copy of the key.
    """
    rows = [line.split(",") for line in BANK_CSV.strip().splitlines()[1:]]
    return {row[0]: int(row[6]) for row in rows}


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        config = write_course(Path(tmp))
        client = TestClient(create_app(config))

        show("GET /api/health", client.get("/api/health").json())
        catalog = client.get("/api/strategies").json()
        print("--- GET /api/strategies")
        for entry in catalog:
            print(f"  {entry['name']:<26} layer={entry['layer']:<8} "
                  f"trainable={entry['trainable']}")
        print()

        created = client.post("/api/sessions", json={
            "user_id": "demo", "topic": "arithmetic",
            "strategy": "concept_map", "length": 5}).json()
        sid = created["session_id"]
        show("POST /api/sessions", created)

        # Scripted answers: right, wrong, don't know, skip, right.
        key = correct_choices()
        question = created["question"]
        for kind in ("right", "wrong", "dont_know", "skip", "right"):
            body = {"question_id": question["id"], "elapsed_ms": 1500,
                    "click_count": 1}
            if kind == "right":
                body["choice_index"] = key[question["id"]]
            elif kind == "wrong":
                body["choice_index"] = (key[question["id"]] + 1) % 4
            elif kind == "dont_know":
                body["dont_know"] = True
            else:
                body["skip"] = True
            reply = client.post(f"/api/sessions/{sid}/answer",
                                json=body).json()
            print(f"answer {question['id']} via {kind:<9} -> "
                  f"correct={reply.get('correct')}")
            question = reply.get("next_question") or question
            if "summary" in reply:
                print()
                show("session summary", reply["summary"])

        retrained = client.post("/api/admin/retrain", json={
            "strategy": "collaborative_filtering"}).json()
        show("POST /api/admin/retrain", retrained)
        print(f"Event log on disk: "
              f"{(Path(tmp) / 'data' / 'events.jsonl').exists()}")


if __name__ == "__main__":
    main()
