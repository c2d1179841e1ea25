#pragma once

#include "bbip/basis.hpp"
#include "bbip/classifier.hpp"
#include "bbip/ensemble_filter.hpp"
#include "bbip/error.hpp"
#include "bbip/eval.hpp"
#include "bbip/model.hpp"
#include "bbip/model_io.hpp"
#include "bbip/session.hpp"
#include "bbip/synthetic.hpp"
#include "bbip/trajectory.hpp"
#include "bbip/trajectory_io.hpp"
