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

// Generates a synthetic TID2013-layout dataset from a folder of images.

#include <CLI11.hpp>

#include <iostream>

#include "perceptlab/synthetic_iqa.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Build a synthetic TID2013-layout IQA dataset"};
  perceptlab::synthetic::FixtureSpec spec;
  std::string corpus, root;
  app.add_option("--corpus", corpus, "Folder of natural images")->required();
  app.add_option("--out", root, "Dataset root to create")->required();
  app.add_option("--refs", spec.references, "Number of reference images")->capture_default_str();
  app.add_option("--size", spec.size, "Reference crop side in pixels")->capture_default_str();
  app.add_option("--levels", spec.levels, "Levels per distortion type (1-5)")->capture_default_str();
  app.add_option("--types", spec.types, "TID2013 distortion type numbers (1,6,8,10,16,17)");
  app.add_option("--seed", spec.seed, "Crop and noise seed")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spec.corpus = corpus;
  spec.root = root;
  try {
    const auto n = perceptlab::synthetic::make_fixture(spec);
    std::cout << "wrote " << n << " distorted images to " << root << '\n';
  } catch (const std::exception& e) {
    std::cerr << "make_iqa_fixture: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
