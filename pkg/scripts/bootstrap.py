# scripts/bootstrap.py

from gebo_package.bench import get_task, random_search_baseline
from gebo_package.utils import configure_logging
import argparse
import json
import os

# Amostras por tarefa para a baseline de busca aleatória
DEFAULT_SAMPLES = {
    "pressure_vessel": 1_000_000,
    "speed_reducer": 100_000,
    "func2c": 100_000,
    "ackley20c": 100_000,
    "env_calibration": 100_000,
}

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Caches best-of-N random-search baselines")
    parser.add_argument("--tasks", nargs="+", default=list(DEFAULT_SAMPLES))
    parser.add_argument("--samples", type=int, default=None, help="override the per-task sample count")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="./data/baselines.json")
    args = parser.parse_args()

    configure_logging()
    print("Diretório atual de execução:", os.getcwd())
    print("[BOOTSTRAP] Gerando baselines de busca aleatória...")

    baselines = {}
    if os.path.exists(args.out):
        with open(args.out) as f:
            baselines = json.load(f)

    for task_id in args.tasks:
        n_samples = args.samples or DEFAULT_SAMPLES.get(task_id, 100_000)
        baselines[task_id] = random_search_baseline(get_task(task_id), n_samples, seed=args.seed)
        print(f"[BOOTSTRAP] {task_id}: {baselines[task_id]['best_value']:.6g} ({n_samples} amostras)")

    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w") as f:
        json.dump(baselines, f, indent=2)
    print("[BOOTSTRAP] Concluído.")
