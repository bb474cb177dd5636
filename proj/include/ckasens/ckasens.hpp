#pragma once

#include "ckasens/core.hpp"
#include "ckasens/harness.hpp"
#include "ckasens/manipulate.hpp"
#include "ckasens/matrix_io.hpp"
#include "ckasens/similarity.hpp"
#include "ckasens/synthetic.hpp"
#include "ckasens/theory.hpp"
#include "ckasens/transforms.hpp"
