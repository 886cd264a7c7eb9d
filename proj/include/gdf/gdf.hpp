#pragma once

#include <gdf/error.hpp>
#include <gdf/sample.hpp>
#include <gdf/core.hpp>
#include <gdf/parallel.hpp>
#include <gdf/modes.hpp>
#include <gdf/ridges.hpp>
#include <gdf/clustering.hpp>
#include <gdf/connectivity.hpp>
#include <gdf/hausdorff.hpp>
#include <gdf/synthetic.hpp>
#include <gdf/harness.hpp>
#include <gdf/ingest.hpp>
#include <gdf/io.hpp>
