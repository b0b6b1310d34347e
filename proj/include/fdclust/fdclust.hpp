#pragma once

#include "fdclust/benchmark.hpp"
#include "fdclust/dataset.hpp"
#include "fdclust/error.hpp"
#include "fdclust/fmi.hpp"
#include "fdclust/fpca.hpp"
#include "fdclust/fsmi.hpp"
#include "fdclust/io.hpp"
#include "fdclust/kmeans.hpp"
#include "fdclust/metrics.hpp"
#include "fdclust/mi_estimators.hpp"
#include "fdclust/pipeline.hpp"
#include "fdclust/random.hpp"
#include "fdclust/simgen.hpp"
