#pragma once

#include "cautious/errors.hpp"
#include "cautious/qmi.hpp"
#include "cautious/basis.hpp"
#include "cautious/regression.hpp"
#include "cautious/bounds.hpp"
#include "cautious/intersection.hpp"
#include "cautious/frank_wolfe.hpp"
#include "cautious/analysis.hpp"
#include "cautious/online.hpp"
