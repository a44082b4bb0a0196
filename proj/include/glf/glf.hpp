#pragma once

#include "glf/autodiff.hpp"
#include "glf/clustering.hpp"
#include "glf/config.hpp"
#include "glf/data.hpp"
#include "glf/eval.hpp"
#include "glf/gradcheck.hpp"
#include "glf/harness.hpp"
#include "glf/io.hpp"
#include "glf/losses.hpp"
#include "glf/models.hpp"
#include "glf/stats.hpp"
