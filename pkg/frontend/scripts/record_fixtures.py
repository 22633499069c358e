"""Record live service responses as JSON fixtures for the workbench tests.

Runs one realistic editing session against the in-process app (the same
ASGI app `bnsense-serve` hosts) and snapshots every response the
workbench consumes. Re-run after any service change:

    python3 frontend/scripts/record_fixtures.py
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from bnsense import formats, model
from bnsense.service import create_app

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

SCENARIO = {"evidence": {"A": "t_A", "H": "t_H"}, "target": "B"}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    recorded: dict[str, object] = {}

    def save(name: str, payload: object) -> None:
        recorded[name] = payload
        (OUT / f"{name}.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n")

    doc = formats.load_dyspnea()
    doc_jsonable = formats.document_to_jsonable(doc)
    save("document", doc_jsonable)

    with TestClient(create_app()) as client:
        r = client.post("/sessions", json=doc_jsonable)
        assert r.status_code == 201, r.text
        sid = r.json()["session_id"]
        save("session_created", r.json())

        save("network_initial", client.get(f"/sessions/{sid}/network").json())

        r = client.post(f"/sessions/{sid}/query", json=SCENARIO)
        save("query_initial", r.json())
        probs_before = r.json()["probabilities"]
        p_before = probs_before[0]

        save("summary_initial",
             client.post(f"/sessions/{sid}/sensitivities",
                         json=dict(SCENARIO, summary=True)).json())
        save("sensitivities_full",
             client.post(f"/sessions/{sid}/sensitivities", json=SCENARIO).json())

        # raise the most sensitive parameter by a fifth
        net = model.scale_to_unit(doc.network)
        param = {"node": "B", "state": "t_B", "given": ["t_A"]}
        current = net.param_value(formats.param_index_from_jsonable(net, param))
        save("patch_raise",
             client.patch(f"/sessions/{sid}/params",
                          json={"updates": [
                              {"param": param, "value": current * 1.2}]}).json())
        r = client.post(f"/sessions/{sid}/query", json=SCENARIO)
        save("query_after_raise", r.json())
        assert r.json()["probabilities"][0] > p_before
        save("summary_after_raise",
             client.post(f"/sessions/{sid}/sensitivities",
                         json=dict(SCENARIO, summary=True)).json())
        save("network_after_raise", client.get(f"/sessions/{sid}/network").json())

        save("undo_after_raise", client.post(f"/sessions/{sid}/undo").json())
        r = client.get(f"/sessions/{sid}/network").json()
        assert r["document"] == recorded["network_initial"]["document"]
        save("network_after_undo", r)
        r = client.post(f"/sessions/{sid}/query", json=SCENARIO)
        assert r.json() == recorded["query_initial"]
        save("query_after_undo", r.json())

        # frozen parameter rejection, surfaced inline by the workbench
        r = client.patch(f"/sessions/{sid}/params", json={"updates": [
            {"param": {"node": "C", "state": "t_C", "given": ["t_B", "t_E"]},
             "value": 0.5}]})
        assert r.status_code == 422
        save("error_frozen", r.json())

        # zero-size probe: current distance without changing the network;
        # assessed values are the response's own floats, so the distance
        # of an untouched prefill is exactly zero
        matched = {"scenario": SCENARIO,
                   "assessed": {"t_B": probs_before[0], "f_B": probs_before[1]}}
        r = client.post(f"/sessions/{sid}/gradient-step",
                        json={"assessment": matched, "step_size": 0.0})
        assert r.json()["distance"] == 0.0
        save("probe_matched", r.json())

        judged = {"scenario": SCENARIO,
                  "assessed": {"t_B": 0.12, "f_B": 0.88}}
        r = client.post(f"/sessions/{sid}/gradient-step",
                        json={"assessment": judged, "step_size": 0.0})
        save("probe_judged", r.json())
        d_probe = r.json()["distance"]

        r = client.post(f"/sessions/{sid}/gradient-step",
                        json={"assessment": judged, "step_size": 0.05})
        assert r.json()["distance"] < d_probe
        save("step_judged", r.json())

        r = client.post(f"/sessions/{sid}/assessments", json=judged)
        assert r.status_code == 201
        save("assessment_added", r.json())
        save("assessments_list",
             client.get(f"/sessions/{sid}/assessments").json())

        r = client.post(f"/sessions/{sid}/fit",
                        json={"rule": "logarithmic", "max_epochs": 120,
                              "step_size": 0.3, "wait": True})
        assert r.status_code == 202
        save("fit_accepted", r.json())
        r = client.get(f"/sessions/{sid}/fit/{r.json()['job_id']}")
        assert r.json()["status"] == "done" and r.json()["applied"]
        save("fit_done", r.json())

        r = client.post(f"/sessions/{sid}/query", json=SCENARIO)
        save("query_after_fit", r.json())
        assert abs(r.json()["probabilities"][0] - 0.12) < 0.02

    print(f"recorded {len(recorded)} fixtures into {OUT}")


if __name__ == "__main__":
    main()
