"""Play one counting trial against the live session service, in-process.

Drives the same HTTP endpoints the browser console uses: create a
stream, open a session, flash... well, no flashing here - derive the
hidden count from the stimulus seed exactly as the client renderer
does, answer two rounds of 3-integer ranges, and finalize. The truth
never appears in a payload until the reveal.
"""

import tempfile

from fastapi.testclient import TestClient

from collabcal.service import create_app, derive_count

app = create_app(data_dir=tempfile.mkdtemp(prefix="collabcal-demo-"))
client = TestClient(app)

client.post("/streams", json={
    "stream_id": "demo", "epsilon": 0.15, "delta": 0.3, "eta": 0.1,
    "seed": 5, "oracle": {"truth_mass": 0.6, "concentration": 0.5,
                          "truth_kappa": 8.0, "confusion_rate": 0.2},
    "task": {"kind": "counting", "count_range": [3, 30], "set_size": 3,
             "max_rounds": 2},
})
session = client.post("/streams/demo/sessions").json()["session_id"]
print(f"session {session} on stream 'demo'")

day = client.post(f"/sessions/{session}/days").json()
stim = day["stimulus"]
print(f"stimulus: seed={stim['render_seed']} shape={stim['shape_type']} "
      f"range={stim['count_range']} exposures={stim['exposure_ms']}ms")
print(f"payload keys carry no truth: {sorted(stim)}")

# What the canvas renderer will draw (and what the human would try to count):
true_count = derive_count(stim["render_seed"], *stim["count_range"])

guess = [true_count - 2, true_count - 1, true_count]  # slightly low eyeball
t1 = client.post(f"/sessions/{session}/turns",
                 json={"set": guess, "message": "maybe around there"}).json()
print(f"round 1: guessed {guess}, AI answered {t1['ai_set']}")

revised = [true_count - 1, true_count, true_count + 1]
t2 = client.post(f"/sessions/{session}/turns", json={"set": revised}).json()
print(f"round 2: revised to {revised}, AI answered {t2['ai_set']}")

fin = client.post(f"/sessions/{session}/finalize",
                  json={"final_set": revised}).json()
print(f"reveal: truth={fin['ground_truth']} (renderer drew {true_count}), "
      f"errors=(ch {fin['e_ch']}, comp {fin['e_comp']})")
print(f"outcome flags: {fin['outcome']}")
print(f"stream thresholds moved to {fin['new_thresholds']}")
print(f"audit: {client.get('/streams/demo/audit').json()['pass']}")
