import json
import sys

for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    request = json.loads(line)
    op = request.get("op")
    if op == "init":
        reply = {"ok": True}
    elif op == "decide":
        state = request.get("state_summary", {})
        done = state.get("snippets_examined_this_serp", 0) >= 1
        reply = {"action": "END" if done else "CONTINUE"}
    else:
        reply = {"error": "unsupported op"}
    sys.stdout.write(json.dumps(reply) + "\n")
    sys.stdout.flush()
