# -----------------------------------------------------------------------------
# File: grid_runner.py
# Description: Parallel execution of independent grid cells with resumable,
#              append-only result files.
#
#              `RecordStore` holds the records of one grid in a JSON envelope
#              and rewrites it atomically after every appended cell, in grid
#              order, so an interrupted run leaves a valid file behind and a
#              resumed run ends with the same bytes.
#
#              `GridRunner` keeps the pending cells in an asyncio queue; a
#              fixed number of consumers hand them to a thread pool and pass
#              the results to the store under a single lock.
#
# License: MIT
# -----------------------------------------------------------------------------

import asyncio
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List

from mtlattack.exceptions.mtlattack_exception import CheckpointError
from mtlattack.lib.json_envelope import JsonEnvelope
from mtlattack.version import __version__


log = logging.getLogger()

RECORDS_FORMAT = "mtlattack.records"


@dataclass(frozen=True)
class GridCell:
    """
    Attributes:
        index (int): position of the cell in the grid.
        cell_id (str): identifier, unique within the grid.
        params (Any): whatever the worker needs to run the cell.
    """
    index: int
    cell_id: str
    params: Any = None


class RecordStore:
    """
    Append-only record file of one grid.

    Attributes:
        path (str): location of the records file.
        header (dict): run-level fields (config hash, seed, tool version, ...).
    """

    __slots__ = ("path", "kind", "header", "_records")

    def __init__(self, path, kind, header: Dict[str, Any]):
        """
        Open the store, loading the cells of a previous run if the file exists.

        :param path: str - records file.
        :param kind: str - grid kind, e.g. "attack"; stored in the file.
        :param header: dict - must contain "config_hash".
        :raises CheckpointError: if an existing file belongs to another config or grid kind.
        """
        self.path = path
        self.kind = kind
        self.header = dict(header, kind=kind, tool_version=__version__)
        self._records = {}

        if os.path.exists(path):
            payload = JsonEnvelope.read(path).unwrap(RECORDS_FORMAT)
            if payload.get("config_hash") != self.header["config_hash"] or payload.get("kind") != kind:
                raise CheckpointError(f"{path} holds records of another run")
            for record in payload.get("cells", []):
                self._records[record["cell_id"]] = record
            log.info(f"resuming {kind} grid from {path}: {len(self._records)} cell(s) already done")

    def __len__(self):
        return len(self._records)

    def has(self, cell_id):
        return cell_id in self._records

    def get(self, cell_id):
        return self._records.get(cell_id)

    @property
    def records(self) -> List[dict]:
        """Records in grid order."""
        return sorted(self._records.values(), key=lambda r: (r["index"], r["cell_id"]))

    def add(self, record: dict):
        """
        Append one cell and rewrite the file.

        :raises ValueError: if the record has no cell_id or index.
        """
        if "cell_id" not in record or "index" not in record:
            raise ValueError("a grid record needs 'cell_id' and 'index'")
        if record["cell_id"] in self._records:
            log.warning(f"cell {record['cell_id']} is already recorded; keeping the first record")
            return
        self._records[record["cell_id"]] = record
        self.flush()

    def flush(self):
        payload = dict(self.header, cells=self.records)
        JsonEnvelope.wrap(RECORDS_FORMAT, payload, indent=1).write(self.path)


def load_records(path, kind=None) -> dict:
    """
    Read a records file without opening it for appending.

    :raises CheckpointError: if the file is missing, malformed or of another kind.
    """
    payload = JsonEnvelope.read(path).unwrap(RECORDS_FORMAT)
    if kind is not None and payload.get("kind") != kind:
        raise CheckpointError(f"{path} holds '{payload.get('kind')}' records, expected '{kind}'")
    return payload


class GridRunner:
    """
    Runs grid cells on `jobs` worker threads and records their results.

    Example usage:
        runner = GridRunner(store, jobs=4)
        records = runner.run(cells, worker)   # worker(cell) -> dict
    """

    __slots__ = ("store", "jobs", "_queue", "_lock")

    def __init__(self, store: RecordStore, jobs=1):
        if not isinstance(jobs, int) or jobs < 1:
            raise ValueError("jobs must be a positive integer")
        self.store = store
        self.jobs = jobs
        self._queue = None
        self._lock = None

    async def _consume(self, worker, executor):
        loop = asyncio.get_running_loop()
        while True:
            try:
                cell = self._queue.get_nowait()
            except asyncio.QueueEmpty:
                return

            try:
                record = await loop.run_in_executor(executor, worker, cell)
                record = dict(record, cell_id=cell.cell_id, index=cell.index)
                async with self._lock:
                    self.store.add(record)
                log.info(f"{self.store.kind} cell {cell.cell_id} done")
            finally:
                self._queue.task_done()

    async def run_async(self, cells: Iterable[GridCell], worker: Callable[[GridCell], dict]) -> List[dict]:
        cells = list(cells)
        ids = [cell.cell_id for cell in cells]
        if len(set(ids)) != len(ids):
            raise ValueError("grid cell ids must be unique")

        self._queue = asyncio.Queue()
        self._lock = asyncio.Lock()
        pending = [cell for cell in cells if not self.store.has(cell.cell_id)]
        skipped = len(cells) - len(pending)
        if skipped:
            log.warning(f"skipping {skipped} {self.store.kind} cell(s) already present in {self.store.path}")
        for cell in pending:
            self._queue.put_nowait(cell)

        if pending:
            with ThreadPoolExecutor(max_workers=self.jobs) as executor:
                consumers = [
                    asyncio.create_task(self._consume(worker, executor))
                    for _ in range(min(self.jobs, len(pending)))
                ]
                await asyncio.gather(*consumers)
        elif not os.path.exists(self.store.path):
            self.store.flush()

        return [self.store.get(cell_id) for cell_id in ids]

    def run(self, cells: Iterable[GridCell], worker: Callable[[GridCell], dict]) -> List[dict]:
        """
        Run every cell that is not recorded yet; return the records of all
        cells in grid order.
        """
        return asyncio.run(self.run_async(cells, worker))
