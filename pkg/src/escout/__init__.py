"""Household smart-meter analytics: windowed views, tariff costing,
quantized aggregates, context overlays, and what-if device modeling."""

from .meter import (FocusBucket, FocusMap, MeterSeries, Reading, TimeWindow,
                    downsample, ingest_csv)
from .tariff import (CostSummary, PeakLabel, TariffPlan, classify, cost,
                     label_slice, load_plan)
# the aggregate() entry point stays on its submodule: re-exporting it here
# would shadow the escout.aggregate module attribute itself
from .aggregate import (AggFilter, AggregateSpec, BinScheme, BinSummary,
                        ComparePair, DayKind, Season, Segment, SpiralGrid,
                        SpiralPeriod, compare, spiral)
from .context import (Annotation, AnnotationStore, CalendarEvent,
                      ContextOverlay, WeatherCondition, WeatherSample,
                      ingest_calendar, ingest_weather, window_context)
from .household import (BalanceState, DeviceProfile, HouseholdProfile,
                        ProfileEnergy, ScaleWeight, ScenarioDelta, UsageClass,
                        UsageEvent, apply_patch, balance, clone_profile,
                        compare_profiles, device_cost, device_energy,
                        profile_energy)

__version__ = "0.1.0"
