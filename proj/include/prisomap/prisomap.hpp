#pragma once

#include "prisomap/datasets.hpp"
#include "prisomap/embeddings.hpp"
#include "prisomap/error.hpp"
#include "prisomap/evaluation.hpp"
#include "prisomap/geodesics.hpp"
#include "prisomap/linalg.hpp"
#include "prisomap/neighbor_graph.hpp"
#include "prisomap/parallel.hpp"
