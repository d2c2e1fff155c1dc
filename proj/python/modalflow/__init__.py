# Copyright 2026 The modalflow Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Modal-interpretation jump dynamics and oscillator phase-space flows."""

from ._core import (
    ConfigError,
    Error,
    __version__,
    born_probabilities,
    husimi_amplitude,
    integrate_master_equation,
    oscillator_trajectory,
    run,
    simulate_ensemble,
    trine_extension,
    verify,
)

__all__ = [
    "ConfigError",
    "Error",
    "__version__",
    "born_probabilities",
    "husimi_amplitude",
    "integrate_master_equation",
    "oscillator_trajectory",
    "run",
    "simulate_ensemble",
    "trine_extension",
    "verify",
]
