# Copyright 2026 The blendnet Authors. All Rights Reserved.
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

"""Graph compiler and fixed-point runtime for binary/fixed-point blended networks."""

from ._blendnet import (
    BlendError,
    Model,
    ModelIoError,
    binary_conv2d,
    build,
    compile,
    count_ops,
    default_passes,
    estimate_latency,
    execute,
    known_archs,
    load,
    random_input,
    reference,
    run_passes,
    threshold_from_bn,
    verify,
)

__all__ = [
    "BlendError",
    "Model",
    "ModelIoError",
    "binary_conv2d",
    "build",
    "compile",
    "count_ops",
    "default_passes",
    "estimate_latency",
    "execute",
    "known_archs",
    "load",
    "random_input",
    "reference",
    "run_passes",
    "threshold_from_bn",
    "verify",
]
