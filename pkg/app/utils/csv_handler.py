# utils/csv_handler.py
import csv
import os
import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import pandas as pd

from app.core.exceptions import DataFormatError

logger = logging.getLogger(__name__)

DEFAULT_ENCODINGS = ['utf-8', 'utf-8-sig', 'latin1']


class CSVHandler:
    """Utility class for CSV file operations with header checking and error reporting."""

    def __init__(self, data_path=None):
        """Initialize the CSV handler.

        Args:
            data_path: Base directory for relative CSV file names
        """
        self.data_path = data_path

    def _get_file_path(self, filename):
        if os.path.isabs(filename) or not self.data_path:
            return filename
        return os.path.join(self.data_path, filename)

    def load_csv(self, filename, expected_header: Optional[Sequence[str]] = None,
                 encodings=None) -> Tuple[List[str], List[Tuple[int, List[str]]]]:
        """Load a CSV file as its header and numbered data rows.

        Args:
            filename: CSV filename
            expected_header: Column names the header must contain (order free)
            encodings: List of encodings to try

        Returns:
            (header, [(line_number, row), ...]); line 1 is the header.

        Raises:
            DataFormatError: missing file, undecodable file or header mismatch (row 1)
        """
        file_path = self._get_file_path(filename)
        if not os.path.exists(file_path):
            raise DataFormatError("CSV file not found", path=file_path)

        for encoding in encodings or DEFAULT_ENCODINGS:
            try:
                logger.debug(f"Trying to read {file_path} with encoding '{encoding}'...")
                with open(file_path, mode='r', newline='', encoding=encoding) as f:
                    reader = csv.reader(f)
                    header = next(reader, None)
                    rows = [(line, row) for line, row in enumerate(reader, start=2) if row]
                break
            except UnicodeDecodeError:
                logger.debug(f"Failed to decode {file_path} with encoding '{encoding}'")
                continue
            except OSError as e:
                raise DataFormatError(f"Error reading CSV file: {e}", path=file_path) from e
        else:
            raise DataFormatError(f"Could not decode CSV file with any of {encodings or DEFAULT_ENCODINGS}",
                                  path=file_path)

        header = [column.strip().lower() for column in (header or [])]
        if expected_header is not None:
            missing = [column for column in expected_header if column not in header]
            if missing:
                raise DataFormatError(f"CSV header missing columns {missing} (found {header})",
                                      path=file_path, row=1)
        logger.info(f"Loaded {len(rows)} rows from {file_path} with encoding '{encoding}'")
        return header, rows

    def save_csv(self, filename, rows: Iterable[Sequence], headers: Optional[Sequence[str]] = None) -> str:
        """Save rows to a CSV file, creating parent directories.

        Returns:
            The path written.

        Raises:
            DataFormatError: the file could not be written
        """
        file_path = self._get_file_path(filename)
        try:
            directory = os.path.dirname(file_path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            count = 0
            with open(file_path, mode='w', newline='', encoding='utf-8') as f:
                writer = csv.writer(f, lineterminator='\n')
                if headers:
                    writer.writerow(headers)
                for row in rows:
                    writer.writerow(row)
                    count += 1
        except OSError as e:
            raise DataFormatError(f"Error saving CSV file: {e}", path=file_path) from e
        logger.info(f"Saved {count} rows to {file_path}")
        return file_path

    def save_dataframe(self, filename, frame: pd.DataFrame, float_format: str) -> str:
        file_path = self._get_file_path(filename)
        try:
            directory = os.path.dirname(file_path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            frame.to_csv(file_path, index=False, float_format=float_format, lineterminator='\n')
        except OSError as e:
            raise DataFormatError(f"Error saving CSV file: {e}", path=file_path) from e
        logger.info(f"Saved {len(frame)} rows to {file_path}")
        return file_path


def load_csv_to_dataframe(file_path, required_columns: Optional[Sequence[str]] = None, encoding='utf-8'):
    """
    Load a CSV file into a pandas DataFrame.

    Args:
        file_path (str): Path to the CSV file
        required_columns: Columns that must be present
        encoding (str): File encoding, defaults to 'utf-8'

    Returns:
        pandas.DataFrame: DataFrame containing the CSV data
    """
    if not os.path.exists(file_path):
        raise DataFormatError("CSV file not found", path=file_path)
    frame = None
    for enc in [encoding] + [e for e in DEFAULT_ENCODINGS if e != encoding]:
        try:
            frame = pd.read_csv(file_path, encoding=enc)
            break
        except UnicodeDecodeError:
            continue
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DataFormatError(f"Could not parse CSV: {e}", path=file_path) from e
    if frame is None:
        raise DataFormatError("Could not decode the CSV file with any supported encoding", path=file_path)
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    missing = [c for c in (required_columns or []) if c not in frame.columns]
    if missing:
        raise DataFormatError(f"CSV header missing columns {missing}", path=file_path, row=1)
    return frame
