"""Chat-completion client with tool calling, rate-limit backoff and transcript
record/replay.

Two wire dialects are spoken behind one interface: ``openai`` (chat
completions) and ``anthropic`` (messages).  The dialect is taken from the
provider configuration and never sniffed from the endpoint.  API keys are read
from the environment variable the configuration names at call time; they are
never stored, logged or written to transcripts.
"""
import os
import time
import hashlib
import logging
import threading
from collections import namedtuple

try:
    import simplejson as json
except ImportError:
    import json

import backoff
import requests

from pysizing.utils import PySizingError, ConfigurationError, scrub
from pysizing.pysizing_config import pysizing_conf

logger = logging.getLogger(__name__)

OPENAI = 'openai'
ANTHROPIC = 'anthropic'
DIALECTS = (OPENAI, ANTHROPIC)

ROLES = ('system', 'user', 'assistant', 'tool')

ANTHROPIC_VERSION = '2023-06-01'

RECORD = 'record'
REPLAY = 'replay'
LIVE = 'live'
MODES = (RECORD, REPLAY, LIVE)


class LLMError(PySizingError):
    """Root of chat-completion failures."""


class RateLimited(LLMError):
    """The provider answered 429; surfaces once the retry budget is spent.

    ``retry_after`` holds the provider's Retry-After hint [s], if any.
    """

    def __init__(self, msg, retry_after=None):
        super(RateLimited, self).__init__(msg)
        self.retry_after = retry_after


class AuthError(LLMError):
    """No API key, or the provider rejected it."""


class TransportError(LLMError):
    """Network failure or an unexpected HTTP status."""


class MalformedResponse(LLMError):
    """The provider answered with something that is not a chat completion."""


class ReplayMismatch(LLMError):
    """A replayed request differs from the recorded one."""


class ReplayExhausted(LLMError):
    """Replay ran past the end of the transcript."""


###############################################################################
### Messages and tools
###############################################################################

class ToolCall(namedtuple('ToolCall', ['id', 'name', 'arguments'])):
    """A tool invocation; ``arguments`` is JSON text."""
    __slots__ = ()

    def to_dict(self):
        return {'id': self.id, 'name': self.name, 'arguments': self.arguments}


class ChatMessage(namedtuple('ChatMessage', ['role', 'content', 'tool_calls',
                                             'tool_call_id'])):
    """One chat turn.

    Tool-role messages answer the assistant tool call named by
    ``tool_call_id``.
    """
    __slots__ = ()

    def __new__(cls, role, content='', tool_calls=(), tool_call_id=None):
        if role not in ROLES:
            raise ValueError("role must be one of {0}, not {1!r}".format(ROLES, role))
        if role == 'tool' and not tool_call_id:
            raise ValueError("tool messages must reference a tool call id")
        tool_calls = tuple(t if isinstance(t, ToolCall) else ToolCall(**t)
                           for t in tool_calls)
        return super(ChatMessage, cls).__new__(cls, role, content or '', tool_calls,
                                               tool_call_id)

    def to_dict(self):
        d = {'role': self.role, 'content': self.content}
        if self.tool_calls:
            d['tool_calls'] = [t.to_dict() for t in self.tool_calls]
        if self.tool_call_id is not None:
            d['tool_call_id'] = self.tool_call_id
        return d

    @classmethod
    def from_dict(cls, data):
        return cls(data['role'], data.get('content', ''), data.get('tool_calls', ()),
                   data.get('tool_call_id'))


def system(content):
    return ChatMessage('system', content)


def user(content):
    return ChatMessage('user', content)


def tool_result(call, content):
    return ChatMessage('tool', content, tool_call_id=call.id)


class ToolSchema(namedtuple('ToolSchema', ['name', 'description', 'parameters'])):
    """A function the model may call; ``parameters`` is a JSON schema object."""
    __slots__ = ()

    def to_dict(self):
        return {'name': self.name, 'description': self.description,
                'parameters': self.parameters}


def _check_tools(tools):
    names = [t.name for t in tools]
    if len(set(names)) != len(names):
        raise ValueError("tool names must be unique per request: {0}".format(names))


###############################################################################
### Provider configuration
###############################################################################

_provider_fields = ['dialect', 'endpoint', 'model_id', 'api_key_env', 'max_retries',
                    'timeout', 'rate_limit', 'backoff_base', 'backoff_ceiling',
                    'temperature', 'max_tokens']


class ProviderConfig(namedtuple('ProviderConfig', _provider_fields)):
    """Where and how to reach a chat-completion provider.

    ``rate_limit`` is in requests per minute; ``backoff_ceiling`` caps the
    total time spent waiting on rate limits in one call [s].
    """
    __slots__ = ()

    def __new__(cls, dialect, endpoint, model_id, api_key_env, max_retries=5, timeout=120.0,
                rate_limit=50.0, backoff_base=1.0, backoff_ceiling=120.0, temperature=0.0,
                max_tokens=4096):
        if dialect not in DIALECTS:
            raise ConfigurationError("provider dialect must be one of {0}, not {1!r}".format(
                                     DIALECTS, dialect))
        if int(max_retries) < 0 or not float(rate_limit) > 0.0:
            raise ConfigurationError("max_retries must be >= 0 and rate_limit > 0")
        return super(ProviderConfig, cls).__new__(
            cls, dialect, endpoint, model_id, api_key_env, int(max_retries), float(timeout),
            float(rate_limit), float(backoff_base), float(backoff_ceiling),
            float(temperature), int(max_tokens))

    @classmethod
    def from_dict(cls, data=None):
        """From a ``provider`` configuration mapping (the configured one by
        default)."""
        data = dict(pysizing_conf['provider'] if data is None else data)
        if 'api_key' in data:
            raise ConfigurationError("API keys are not accepted in configuration; name the "
                                     "environment variable with 'api_key_env'")
        unknown = set(data) - set(_provider_fields)
        if unknown:
            raise ConfigurationError("unknown provider keys: {0}".format(sorted(unknown)))
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigurationError("incomplete provider configuration: {0}".format(e))


###############################################################################
### Wire formats
###############################################################################

def _openai_message(msg):
    d = {'role': msg.role, 'content': msg.content}
    if msg.tool_calls:
        d['tool_calls'] = [{'id': t.id, 'type': 'function',
                            'function': {'name': t.name, 'arguments': t.arguments}}
                           for t in msg.tool_calls]
        if not msg.content:
            d['content'] = None
    if msg.role == 'tool':
        d['tool_call_id'] = msg.tool_call_id
    return d


def _anthropic_blocks(msg):
    if msg.role == 'tool':
        return 'user', [{'type': 'tool_result', 'tool_use_id': msg.tool_call_id,
                         'content': msg.content}]
    blocks = []
    if msg.content:
        blocks.append({'type': 'text', 'text': msg.content})
    for t in msg.tool_calls:
        blocks.append({'type': 'tool_use', 'id': t.id, 'name': t.name,
                       'input': json.loads(t.arguments or '{}')})
    return msg.role, blocks


def encode_request(cfg, messages, tools=()):
    """Request headers (without credentials) and JSON body for a dialect."""
    if cfg.dialect == OPENAI:
        body = {'model': cfg.model_id,
                'messages': [_openai_message(m) for m in messages],
                'temperature': cfg.temperature,
                'max_tokens': cfg.max_tokens}
        if tools:
            body['tools'] = [{'type': 'function', 'function': t.to_dict()} for t in tools]
            body['tool_choice'] = 'auto'
        return {'content-type': 'application/json'}, body
    sys_text = '\n\n'.join(m.content for m in messages if m.role == 'system')
    turns = []
    for m in messages:
        if m.role == 'system':
            continue
        role, blocks = _anthropic_blocks(m)
        if turns and turns[-1]['role'] == role:
            turns[-1]['content'].extend(blocks)
        else:
            turns.append({'role': role, 'content': blocks})
    body = {'model': cfg.model_id, 'messages': turns, 'temperature': cfg.temperature,
            'max_tokens': cfg.max_tokens}
    if sys_text:
        body['system'] = sys_text
    if tools:
        body['tools'] = [{'name': t.name, 'description': t.description,
                          'input_schema': t.parameters} for t in tools]
    return {'content-type': 'application/json', 'anthropic-version': ANTHROPIC_VERSION}, body


def _auth_headers(cfg, key):
    if cfg.dialect == OPENAI:
        return {'authorization': 'Bearer ' + key}
    return {'x-api-key': key}


def decode_response(cfg, data):
    """Parses a provider response into (ChatMessage, usage dict).

    Raises
    ------
    MalformedResponse

    """
    try:
        if cfg.dialect == OPENAI:
            msg = data['choices'][0]['message']
            calls = [ToolCall(c['id'], c['function']['name'], c['function']['arguments'])
                     for c in msg.get('tool_calls') or ()]
            usage = data.get('usage') or {}
            usage = {'prompt_tokens': usage.get('prompt_tokens', 0),
                     'completion_tokens': usage.get('completion_tokens', 0)}
            return ChatMessage('assistant', msg.get('content') or '', calls), usage
        texts, calls = [], []
        for block in data['content']:
            if block['type'] == 'text':
                texts.append(block['text'])
            elif block['type'] == 'tool_use':
                calls.append(ToolCall(block['id'], block['name'],
                                      json.dumps(block['input'], sort_keys=True)))
        usage = data.get('usage') or {}
        usage = {'prompt_tokens': usage.get('input_tokens', 0),
                 'completion_tokens': usage.get('output_tokens', 0)}
        return ChatMessage('assistant', '\n'.join(texts), calls), usage
    except (KeyError, IndexError, TypeError, ValueError) as e:
        raise MalformedResponse("unexpected {0} response shape: {1}".format(cfg.dialect, e))


###############################################################################
### Rate limiting
###############################################################################

class RateLimiter(object):
    """Spaces request admissions at least 60/rate_limit seconds apart.

    Each caller reserves its slot under the lock and waits for it outside,
    so concurrent callers queue without serializing on the sleep.
    """

    def __init__(self, rate_limit, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / rate_limit
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = None

    def acquire(self):
        with self._lock:
            now = self._clock()
            slot = now if self._next is None else max(now, self._next)
            self._next = slot + self.interval
        if slot > now:
            self._sleep(slot - now)


_limiters = {}
_limiters_lock = threading.Lock()


def shared_limiter(cfg):
    """The process-wide limiter for a provider endpoint and model."""
    key = (cfg.endpoint, cfg.model_id)
    with _limiters_lock:
        if key not in _limiters:
            _limiters[key] = RateLimiter(cfg.rate_limit)
        return _limiters[key]


###############################################################################
### Clients
###############################################################################

def requests_transport(url, headers, body, timeout):
    """POSTs JSON text; returns (status, text, headers)."""
    try:
        resp = requests.post(url, headers=headers, data=body.encode('utf-8'), timeout=timeout)
    except requests.exceptions.RequestException as e:
        raise TransportError("{0}: {1}".format(e.__class__.__name__, e))
    return resp.status_code, resp.text, dict(resp.headers)


def _retry_after(headers):
    after = (headers or {}).get('retry-after') or (headers or {}).get('Retry-After')
    try:
        return float(after) if after else None
    except ValueError:
        return None


def retry_waits(base=1.0, ceiling=None):
    """Wait generator for :func:`backoff.on_exception`: ``base * 2**n``,
    raised to the provider's Retry-After hint and capped so the waits of one
    call never add up past ``ceiling``.  Stops (and so gives up) once the
    ceiling is spent."""
    exc = yield
    n = 0
    waited = 0.0
    while True:
        delay = base * 2 ** n
        hint = getattr(exc, 'retry_after', None)
        if hint:
            delay = max(delay, hint)
        if ceiling is not None:
            delay = min(delay, ceiling - waited)
            if delay <= 0.0:
                return
        waited += delay
        n += 1
        exc = yield delay


class ChatClient(object):
    """Live client for one provider.

    Rate limits (429), 5xx answers and transport failures are retried through
    :func:`backoff.on_exception` with :func:`retry_waits`, up to
    ``max_retries`` times.

    Parameters
    ----------
    cfg : ProviderConfig
    transport : callable, optional
        ``transport(url, headers, body_text, timeout) -> (status, text,
        headers)``; :func:`requests_transport` by default.
    environ : mapping, optional
        Where the API key is looked up; os.environ by default.
    limiter : RateLimiter, optional
        Defaults to the process-wide limiter for the provider.

    Attributes
    ----------
    usage : list of dict
        Token counts and retries for each completed call.

    """

    def __init__(self, cfg, transport=None, environ=None, limiter=None):
        self.cfg = cfg
        self.transport = requests_transport if transport is None else transport
        self.environ = os.environ if environ is None else environ
        self.limiter = shared_limiter(cfg) if limiter is None else limiter
        self.usage = []

    def _scrub(self, text):
        return scrub(text, [self.cfg.api_key_env], self.environ)

    def api_key(self):
        key = self.environ.get(self.cfg.api_key_env)
        if not key:
            raise AuthError("environment variable {0} is not set".format(
                            self.cfg.api_key_env))
        return key

    def _post(self, headers, body):
        """One admission-limited request; raises the retryable failures."""
        cfg = self.cfg
        self.limiter.acquire()
        try:
            status, text, resp_headers = self.transport(cfg.endpoint, headers, body,
                                                        cfg.timeout)
        except TransportError as e:
            raise TransportError(self._scrub(str(e)))
        if status == 429:
            raise RateLimited("HTTP 429 from {0}".format(cfg.model_id),
                              _retry_after(resp_headers))
        if status >= 500:
            raise TransportError("HTTP {0} from {1}".format(status, cfg.model_id))
        return status, text

    def _log_backoff(self, details):
        logger.warning("%s; retry %d/%d in %.1f s", details['exception'], details['tries'],
                       self.cfg.max_retries, details['wait'])

    def complete(self, messages, tools=()):
        """Sends one chat request and returns the assistant message.

        Raises
        ------
        AuthError
            Before any network traffic when the key is missing.
        RateLimited, TransportError, MalformedResponse

        """
        if not messages:
            raise ValueError("a chat request needs at least one message")
        tools = list(tools)
        _check_tools(tools)
        key = self.api_key()
        cfg = self.cfg
        headers, body = encode_request(cfg, messages, tools)
        headers.update(_auth_headers(cfg, key))
        body = json.dumps(body, sort_keys=True)
        tries = []
        post = backoff.on_exception(retry_waits, (RateLimited, TransportError),
                                    max_tries=cfg.max_retries + 1,
                                    max_time=cfg.backoff_ceiling, jitter=None,
                                    on_backoff=self._log_backoff,
                                    on_success=lambda d: tries.append(d['tries']),
                                    logger=None, base=cfg.backoff_base,
                                    ceiling=cfg.backoff_ceiling)(self._post)
        status, text = post(headers, body)
        retries = tries[0] - 1
        if status in (401, 403):
            raise AuthError("provider rejected the API key (HTTP {0})".format(status))
        if status >= 400:
            raise TransportError("HTTP {0}: {1}".format(status, self._scrub(text)[:500]))
        try:
            data = json.loads(text)
        except ValueError as e:
            raise MalformedResponse("response is not JSON: {0}".format(e))
        reply, usage = decode_response(cfg, data)
        usage['retries'] = retries
        self.usage.append(usage)
        if retries:
            logger.info("completion from %s succeeded after %d retries", cfg.model_id, retries)
        return reply


def complete(cfg, messages, tools=(), **kwargs):
    """One-shot completion; keyword arguments go to :class:`ChatClient`."""
    return ChatClient(cfg, **kwargs).complete(messages, tools)


###############################################################################
### Transcripts
###############################################################################

def request_hash(messages, tools=(), model_id=None):
    """sha256 of the canonical JSON of a request."""
    canon = json.dumps({'model': model_id,
                        'messages': [m.to_dict() for m in messages],
                        'tools': [t.to_dict() for t in tools]},
                       sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canon.encode('utf-8')).hexdigest()


class TranscriptClient(object):
    """Wraps a client to record its calls to, or replay them from, a JSON-lines
    transcript.

    Parameters
    ----------
    path : str
        Transcript file.  Recording appends; replay reads it whole.
    mode : str
        'record', 'replay' or 'live' (pass-through).
    inner : client, optional
        The live client; not needed to replay.
    scrub_env : sequence of str, optional
        Environment variables whose values are blanked in records.
    model_id : str, optional
        Mixed into request hashes.

    """

    def __init__(self, path, mode, inner=None, scrub_env=(), model_id=None):
        if mode not in MODES:
            raise ConfigurationError("transcript mode must be one of {0}".format(MODES))
        if mode != REPLAY and inner is None:
            raise ConfigurationError("{0} mode needs a live client".format(mode))
        self.path = path
        self.mode = mode
        self.inner = inner
        self.model_id = model_id
        self.scrub_env = list(scrub_env)
        if inner is not None and getattr(inner, 'cfg', None) is not None:
            self.scrub_env.append(inner.cfg.api_key_env)
            if self.model_id is None:
                self.model_id = inner.cfg.model_id
        self._entries = []
        self._pos = 0
        self._lock = threading.Lock()
        if mode == REPLAY:
            try:
                with open(path) as f:
                    self._entries = [json.loads(line) for line in f if line.strip()]
            except (IOError, OSError, ValueError) as e:
                raise ConfigurationError("could not read transcript {0!r}: {1}".format(path, e))

    @property
    def usage(self):
        if self.inner is not None:
            return self.inner.usage
        return [e.get('usage', {}) for e in self._entries[:self._pos]]

    def complete(self, messages, tools=()):
        tools = list(tools)
        h = request_hash(messages, tools, self.model_id)
        if self.mode == REPLAY:
            with self._lock:
                return self._replay(h)
        reply = self.inner.complete(messages, tools)
        if self.mode == RECORD:
            with self._lock:
                self._record(h, messages, reply)
        return reply

    def _replay(self, h):
        if self._pos >= len(self._entries):
            raise ReplayExhausted("transcript {0!r} has no call {1}".format(self.path,
                                                                            self._pos + 1))
        entry = self._entries[self._pos]
        if entry['request_hash'] != h:
            raise ReplayMismatch("call {0}: expected request {1}, got {2}".format(
                                 self._pos + 1, entry['request_hash'], h))
        self._pos += 1
        return ChatMessage.from_dict(entry['response'])

    def _record(self, h, messages, reply):
        usage = self.inner.usage[-1] if getattr(self.inner, 'usage', None) else {}
        entry = {'index': self._pos + 1, 'request_hash': h,
                 'request': [m.to_dict() for m in messages],
                 'response': reply.to_dict(), 'usage': usage}
        line = scrub(json.dumps(entry, sort_keys=True), self.scrub_env,
                     getattr(self.inner, 'environ', None))
        with open(self.path, 'a') as f:
            f.write(line + '\n')
        self._pos += 1


def record_replay(transcript_path, mode, inner=None, **kwargs):
    """A client wrapper that records to or replays from a transcript."""
    return TranscriptClient(transcript_path, mode, inner, **kwargs)
