/*
 * Copyright 2026 The hdindex Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Umbrella header: the whole library.

#ifndef HDINDEX_HDINDEX_HPP
#define HDINDEX_HDINDEX_HPP

#include "hdindex/borda.hpp"
#include "hdindex/builder.hpp"
#include "hdindex/common.hpp"
#include "hdindex/core.hpp"
#include "hdindex/eval.hpp"
#include "hdindex/hilbert.hpp"
#include "hdindex/ingest.hpp"
#include "hdindex/pagestore.hpp"
#include "hdindex/query.hpp"
#include "hdindex/rdbtree.hpp"
#include "hdindex/refsel.hpp"

#endif  // HDINDEX_HDINDEX_HPP
