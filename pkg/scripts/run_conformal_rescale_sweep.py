from fefferman_tractor.feffcheck.checker import CheckOptions, corpus_files, run_check
from fefferman_tractor.feffcheck.geometry_file import GeometryFile, RescaledGeometryFile
import numpy as np
import polars as pl
import os
import time
from datetime import datetime
from multiprocessing import Pool, cpu_count
import logging

# Conformal factors ω for the rescaled metric e^{2ω} g; written over generic coordinate positions
omega_templates = ["0", "{0}/10", "{0}*{1}/20", "sin({0})/5", "({0}^2 - {1}^2)/10"]

# Sample points per run
num_samples = 12

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

experiment_folder = "data/conformal_rescale_sweep"
os.makedirs(experiment_folder, exist_ok=True)


def run_single_rescale(path, template):
    """
    Compare λ and the verdict of one corpus geometry before and after one rescaling.

    Returns:
        dict: summary row, with the error message if the run failed
    """
    row = {"file": os.path.basename(path), "omega": None, "verdict": None, "rescaled_verdict": None,
           "lambda_mean": None, "max_lambda_difference": None, "seconds": None, "error": None}
    try:
        start = time.time()
        geometry_file = GeometryFile.from_file(path)
        coords = geometry_file.spec.coords
        omega = template.format(*coords)
        row["omega"] = omega
        options = CheckOptions(samples=num_samples)
        base = run_check(geometry_file, options)
        rescaled = run_check(RescaledGeometryFile.from_geometry_file(geometry_file, omega), options)
        difference = np.abs(np.array(base.lambda_record.values) - np.array(rescaled.lambda_record.values))
        row.update({
            "verdict": base.verdict,
            "rescaled_verdict": rescaled.verdict,
            "lambda_mean": base.lambda_record.mean,
            "max_lambda_difference": float(np.max(difference)),
            "seconds": time.time() - start,
        })
        logger.info(f"{row['file']} with ω = {omega}: {base.verdict} -> {rescaled.verdict}")
    except Exception as e:
        row["error"] = f"{type(e).__name__}: {e}"
        logger.error(f"{row['file']} with template {template}: {row['error']}")
    return row


if __name__ == '__main__':
    tasks = [(path, template) for path in corpus_files() for template in omega_templates]
    print(f"=== Starting conformal rescale sweep at {datetime.now().strftime('%Y-%m-%d %H:%M:%S')} ===")
    print(f"Total runs: {len(tasks)}")
    experiment_start_time = time.time()

    num_processes = max(1, int(cpu_count() * 0.7))
    with Pool(processes=num_processes) as pool:
        rows = pool.starmap(run_single_rescale, tasks)

    results_df = pl.DataFrame(rows)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    output_file = os.path.join(experiment_folder, f"conformal_rescale_sweep_{timestamp}.parquet")
    results_df.write_parquet(output_file)

    changed = results_df.filter(pl.col("verdict") != pl.col("rescaled_verdict"))
    print(results_df.select(["file", "omega", "verdict", "rescaled_verdict", "max_lambda_difference"]))
    print(f"Runs with a changed verdict: {changed.height}")
    print(f"Results saved to: {output_file}")
    print(f"Total experiment time: {time.time() - experiment_start_time:.2f}s")
