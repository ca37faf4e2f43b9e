#!/usr/bin/env python3
"""Line-protocol trainer stand-in used by the tests.

usage: fake_trainer.py MODE [--log FILE] [--after N]

MODE: ok | fail | crash | garbage | hang | wrong-id
With --after N the first N requests are answered normally before MODE
takes effect.
"""
import json
import sys
import time


def accuracy(channels):
    return min(0.9, 0.3 + 0.002 * sum(channels))


def main():
    args = sys.argv[1:]
    mode = args[0]
    log = None
    after = 0
    if "--log" in args:
        log = args[args.index("--log") + 1]
    if "--after" in args:
        after = int(args[args.index("--after") + 1])

    served = 0
    for line in sys.stdin:
        req = json.loads(line)
        if log:
            with open(log, "a") as f:
                f.write(json.dumps(req) + "\n")
        active = mode if served >= after else "ok"
        served += 1
        if active == "crash":
            sys.exit(3)
        if active == "hang":
            time.sleep(3600)
        if active == "garbage":
            print("this is not json", flush=True)
            continue
        run_id = req["run_id"] if active != "wrong-id" else "someone-else"
        status = "failed" if active == "fail" else "ok"
        top1 = accuracy(req["channels"])
        reply = {"run_id": run_id, "status": status, "top1": top1, "top5": min(1.0, top1 + 0.05),
                 "wall_seconds": 0.01, "extra": "ignored"}
        print(json.dumps(reply), flush=True)


if __name__ == "__main__":
    main()
