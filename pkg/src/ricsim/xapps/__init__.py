"""Reference xApps (KPIMON, RAN slicing) and the xApp-side RIC client."""

from ricsim.xapps.client import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SUBSCRIPTION,
    EXIT_TRANSPORT,
    RicClient,
    Xapp,
)
from ricsim.xapps.descriptor import XappDescriptor, builtin_descriptor, load_descriptor
from ricsim.xapps.kpimon import Kpimon
from ricsim.xapps.metrics import CSV_COLUMNS, MetricRow, MetricSink, read_csv
from ricsim.xapps.slicing import (
    Phase,
    SliceSchedule,
    SlicingXapp,
    three_operator_schedule,
)

__all__ = [
    "CSV_COLUMNS", "EXIT_CONFIG", "EXIT_OK", "EXIT_SUBSCRIPTION", "EXIT_TRANSPORT", "Kpimon",
    "MetricRow", "MetricSink", "Phase", "RicClient", "SliceSchedule", "SlicingXapp", "Xapp",
    "XappDescriptor", "builtin_descriptor", "load_descriptor", "three_operator_schedule", "read_csv",
]
