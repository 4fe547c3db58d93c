from fefferman_tractor.feffcheck.checker import corpus_selftest
import os
import sys
import time
from datetime import datetime
from multiprocessing import cpu_count
import logging

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

results_folder = "data/selftest"
os.makedirs(results_folder, exist_ok=True)

if __name__ == '__main__':
    corpus_dir = sys.argv[1] if len(sys.argv) > 1 else None
    num_processes = max(1, int(cpu_count() * 0.7))
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    summary_file = os.path.join(results_folder, f"selftest_summary_{timestamp}.parquet")

    print(f"=== Starting corpus selftest at {datetime.now().strftime('%Y-%m-%d %H:%M:%S')} ===")
    start = time.time()
    status, summary = corpus_selftest(corpus_dir, workers=num_processes, summary_path=summary_file)
    if summary is None:
        print("no corpus")
    else:
        print(summary.select(["file", "expected_verdict", "verdict", "lambda_sign", "matched", "error"]))
        print(f"Summary saved to: {summary_file}")
    print(f"Selftest finished with status {status} in {time.time() - start:.2f}s")
    sys.exit(status)
