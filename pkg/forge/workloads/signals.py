"""
Django signals for pipeline events
Provider calls are logged as JSON lines; live transcripts are written per call
"""
import json
import logging
from pathlib import Path

from django.dispatch import Signal, receiver
from django.utils import timezone

logger = logging.getLogger(__name__)
call_logger = logging.getLogger('provider_calls')

# kwargs: call_index, provider, latency_ms, statements, ok, error, prompt, response, transcript_dir
provider_call_completed = Signal()

# kwargs: labeled (LabeledQuery)
query_labeled = Signal()

# kwargs: stage, artifacts, duration_ms
stage_completed = Signal()


@receiver(provider_call_completed)
def log_provider_call(sender, call_index, provider, latency_ms, statements, ok,
                      error=None, prompt=None, response=None, transcript_dir=None, **kwargs):
    """
    One JSON object per provider call; prompt/response pair to the transcript directory
    """
    log_data = {
        'timestamp': timezone.now().isoformat(),
        'call_index': call_index,
        'provider': provider,
        'latency_ms': round(latency_ms, 3),
        'statements': statements,
        'status': 'ok' if ok else 'failed',
    }
    if error:
        log_data['error'] = error

    if ok:
        call_logger.info(json.dumps(log_data))
    else:
        call_logger.warning(json.dumps(log_data))

    if transcript_dir:
        try:
            path = Path(transcript_dir)
            path.mkdir(parents=True, exist_ok=True)
            (path / f'call_{call_index:04d}.txt').write_text(
                f'### PROMPT\n{prompt or ""}\n\n### RESPONSE\n{response or error or ""}\n',
                encoding='utf-8'
            )
        except OSError as e:
            logger.error(f'Could not write transcript for call {call_index}: {e}')


@receiver(query_labeled)
def log_query_labeled(sender, labeled, **kwargs):
    logger.debug(
        f'Labeled {labeled.query_id}: cardinality={labeled.cardinality} '
        f'universe={labeled.universe_size} mode={labeled.label_mode}'
    )


@receiver(stage_completed)
def log_stage_completed(sender, stage, artifacts=(), duration_ms=0.0, **kwargs):
    logger.info(f'Stage {stage} completed in {duration_ms:.1f} ms: {", ".join(str(a) for a in artifacts) or "no artifacts"}')
