#pragma once

#include "sensekern/count_vector.hpp"
#include "sensekern/error.hpp"
#include "sensekern/fingerprint.hpp"
#include "sensekern/gram.hpp"
#include "sensekern/harness.hpp"
#include "sensekern/kernels.hpp"
#include "sensekern/log_gamma.hpp"
#include "sensekern/pyramid.hpp"
#include "sensekern/svm.hpp"
#include "sensekern/text.hpp"
