#ifndef MODCAUSAL_MODCAUSAL_HPP
#define MODCAUSAL_MODCAUSAL_HPP

#include "modcausal/corpus.hpp"
#include "modcausal/delayed_feedback.hpp"
#include "modcausal/error.hpp"
#include "modcausal/evaluate.hpp"
#include "modcausal/features.hpp"
#include "modcausal/its.hpp"
#include "modcausal/parallel.hpp"
#include "modcausal/report.hpp"
#include "modcausal/stats.hpp"
#include "modcausal/synth.hpp"

#endif // MODCAUSAL_MODCAUSAL_HPP
