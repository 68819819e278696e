"""End-to-end run of the command-line tools on loopback."""

import csv
import pathlib
import re
import subprocess
import sys
import tempfile


def main(qtracker: str, faultsrv: str) -> int:
    with tempfile.TemporaryDirectory() as tmp:
        work = pathlib.Path(tmp)
        server = subprocess.Popen(
            [faultsrv, "--listen", "127.0.0.1:0", "--seed", "9"],
            stderr=subprocess.PIPE, text=True)
        try:
            line = server.stderr.readline()
            match = re.search(r"listening on (\S+),", line)
            if not match:
                print("faultsrv did not start:", line)
                return 1
            targets = work / "targets.txt"
            targets.write_text(f"# loopback\nlocal,{match.group(1)}\n")
            run = subprocess.run(
                [qtracker, "run", "--targets", str(targets), "--seed", "42",
                 "--provider-seed", "9", "--out", str(work / "corpus")],
                capture_output=True, text=True, timeout=120)
        finally:
            server.terminate()
            server.wait(timeout=10)
        if run.returncode != 0:
            print(run.stderr)
            return 1
        codes = [row.split("\t")[2] for row in run.stdout.splitlines()]
        if codes != ["0"] * 7:
            print("unexpected codes:", run.stdout)
            return 1

        report = subprocess.run(
            [qtracker, "report", "--corpus", str(work / "corpus"), "--out", str(work / "report")],
            capture_output=True, text=True, timeout=60)
        if report.returncode != 0:
            print(report.stderr)
            return 1
        grids = list((work / "report").glob("grid-*.csv"))
        rows = list(csv.reader(grids[0].open()))
        if len(grids) != 1 or rows[1] != ["local"] + ["0"] * 7:
            print("unexpected grid:", rows)
            return 1

        dissect = subprocess.run([qtracker, "dissect", "--hex", "40" + "ab" * 8 + "0701"],
                                 capture_output=True, text=True, timeout=30)
        if dissect.returncode != 0 or "body (ping)" not in dissect.stdout:
            print(dissect.stdout, dissect.stderr)
            return 1

        bad = subprocess.run([faultsrv, "--fault", "no_such_fault"], capture_output=True, timeout=30)
        if bad.returncode != 2:
            print("unknown fault accepted")
            return 1
    print("cli smoke ok")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1], sys.argv[2]))
