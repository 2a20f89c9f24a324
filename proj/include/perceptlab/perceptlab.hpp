// Copyright 2026 The PerceptLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "perceptlab/activation_map.hpp"
#include "perceptlab/checkpoint.hpp"
#include "perceptlab/config.hpp"
#include "perceptlab/corpus.hpp"
#include "perceptlab/distortions.hpp"
#include "perceptlab/error.hpp"
#include "perceptlab/image_io.hpp"
#include "perceptlab/iqa.hpp"
#include "perceptlab/layers.hpp"
#include "perceptlab/model.hpp"
#include "perceptlab/objectives.hpp"
#include "perceptlab/optimizer.hpp"
#include "perceptlab/plot.hpp"
#include "perceptlab/spearman.hpp"
#include "perceptlab/sweep.hpp"
#include "perceptlab/train.hpp"
#include "perceptlab/util.hpp"
