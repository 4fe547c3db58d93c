from fefferman_tractor.feffcheck.checker import DEFAULT_CORPUS
from fefferman_tractor.feffcheck.geometry_file import GeometryFile
from fefferman_tractor.holonomy import rectangle, transport
import numpy as np
import polars as pl
import os
import time
from datetime import datetime
from multiprocessing import Pool, cpu_count
import logging

# Geometries whose tractor curvature does not vanish at the domain center
geometry_names = ["sphere_product_4d", "negative_control_perturbed_flat"]

# Loop sides as a fraction of each coordinate width
epsilon_values = [0.2, 0.1, 0.05, 0.025, 0.0125]

# RK4 steps per loop
num_steps = 800

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

experiment_folder = "data/holonomy_scaling_experiment"
os.makedirs(experiment_folder, exist_ok=True)


def run_single_plane(geometry_name, axes):
    """
    Transport around shrinking rectangles in one coordinate plane.

    Returns:
        list: one row per epsilon with |H - id| and the ratio to the next smaller loop
    """
    geometry_file = GeometryFile.from_file(str(DEFAULT_CORPUS / f"{geometry_name}.json"))
    spec = geometry_file.spec
    base = spec.domain_center()
    widths = np.array([hi - lo for lo, hi in spec.domain])
    rows = []
    for epsilon in epsilon_values:
        sides = (epsilon * widths[axes[0]], epsilon * widths[axes[1]])
        loop = rectangle(base, axes, sides, spec.pool)
        start = time.time()
        H = transport(loop, spec, num_steps).H
        rows.append({
            "geometry": geometry_name,
            "plane": f"{axes[0]}{axes[1]}",
            "epsilon": epsilon,
            "deviation": float(np.max(np.abs(H - np.eye(H.shape[0])))),
            "seconds": time.time() - start,
        })
    for row, smaller in zip(rows[:-1], rows[1:]):
        row["ratio"] = row["deviation"] / smaller["deviation"] if smaller["deviation"] > 0 else None
    rows[-1]["ratio"] = None
    logger.info(f"{geometry_name} plane {axes}: deviations {[round(row['deviation'], 12) for row in rows]}")
    return rows


if __name__ == '__main__':
    tasks = []
    for geometry_name in geometry_names:
        dimension = GeometryFile.from_file(str(DEFAULT_CORPUS / f"{geometry_name}.json")).spec.dimension
        for i in range(dimension):
            for j in range(i + 1, dimension):
                tasks.append((geometry_name, (i, j)))

    print(f"=== Starting holonomy scaling experiment at {datetime.now().strftime('%Y-%m-%d %H:%M:%S')} ===")
    print(f"Total planes to transport around: {len(tasks)}")
    experiment_start_time = time.time()

    num_processes = max(1, int(cpu_count() * 0.7))
    with Pool(processes=num_processes) as pool:
        results = pool.starmap(run_single_plane, tasks)

    rows = [row for plane_rows in results for row in plane_rows]
    results_df = pl.DataFrame(rows).sort(["geometry", "plane", "epsilon"], descending=[False, False, True])
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    output_file = os.path.join(experiment_folder, f"holonomy_scaling_{timestamp}.parquet")
    results_df.write_parquet(output_file)

    # quadratic scaling shows up as a ratio near 4 between successive halvings
    summary = results_df.filter(pl.col("ratio").is_not_null()).group_by(["geometry", "plane"]).agg([
        pl.col("ratio").mean().alias("mean_ratio"),
        pl.col("deviation").max().alias("max_deviation"),
    ]).sort(["geometry", "plane"])
    print(summary)
    print(f"Results saved to: {output_file}")
    print(f"Total experiment time: {time.time() - experiment_start_time:.2f}s")
