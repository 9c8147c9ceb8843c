# app/core/threading.py
import logging
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence

logger = logging.getLogger(__name__)


@dataclass
class WorkerResult:
    """
    Outcome of one worker.

    Exactly one of ``result`` / ``error`` is meaningful: ``error`` holds
    (exception type, exception, formatted traceback) when the task raised.
    """
    name: str
    result: Any = None
    error: Optional[tuple] = None

    @property
    def ok(self) -> bool:
        return self.error is None


class Worker:
    """
    Runs one callable and captures its result or its error.

    Args:
        fn (function): The function to run.
        *args: Arguments to pass to the function.
        status_callback (callable, optional): Receives short status strings.
        **kwargs: Keyword arguments to pass to the function.
    """
    def __init__(self, fn: Callable, *args, status_callback: Optional[Callable[[str], None]] = None, **kwargs):
        self.fn = fn
        self.args = args
        self.kwargs = kwargs
        self.status_callback = status_callback
        self.name = getattr(fn, "__name__", repr(fn))

    def _status(self, message: str) -> None:
        if self.status_callback:
            self.status_callback(message)

    def run(self) -> WorkerResult:
        logger.debug(f"Worker started for function: {self.name}")
        self._status(f"Starting task: {self.name}...")
        try:
            result = self.fn(*self.args, **self.kwargs)
        except Exception as e:
            logger.error(f"Error in worker for {self.name}: {e}", exc_info=True)
            return WorkerResult(self.name, error=(type(e), e, traceback.format_exc()))
        logger.debug(f"Worker for {self.name} completed successfully.")
        self._status(f"Finished task: {self.name}")
        return WorkerResult(self.name, result=result)


def run_workers(workers: Sequence[Worker], max_workers: int = 1) -> List[WorkerResult]:
    """
    Executes workers and returns their results in submission order.

    ``max_workers <= 1`` runs them sequentially on the calling thread.
    """
    if max_workers <= 1 or len(workers) <= 1:
        return [w.run() for w in workers]
    logger.info(f"Running {len(workers)} workers on {max_workers} threads")
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(w.run) for w in workers]
        return [f.result() for f in futures]
