"""Bundled source-text assets emitted alongside generated tests.

The interceptor scaffold is shipped as text for the target project to
compile; this package never executes it. The few-shot examples are
synthetic, replaceable snippets demonstrating focal calls wrapped in
try-catch so assertions still run when the exploit throws.
"""

INTERCEPTOR_FILE_NAME = "MethodCallInterceptor.java"

INTERCEPTOR_SOURCE = '''\
import java.util.regex.Pattern;

import net.bytebuddy.agent.ByteBuddyAgent;
import net.bytebuddy.agent.builder.AgentBuilder;
import net.bytebuddy.asm.Advice;
import net.bytebuddy.matcher.ElementMatchers;

/**
 * Records whether a designated third-party method runs during the current
 * test execution and whether the observed argument values satisfy the
 * disclosed trigger conditions.
 *
 * Dual validation:
 *   isTriggered()    the vulnerable method executed at least once
 *   isConditionMet() a recorded invocation carried the trigger values
 *
 * Condition matching operates on String.valueOf of each argument with the
 * predicates contains, equals and matches (regex). Non-string trigger
 * payloads are therefore compared through their string rendering.
 */
public final class MethodCallInterceptor {

    private static volatile boolean triggered;
    private static volatile boolean conditionMet;
    private static volatile Object[] expectedArgs = new Object[0];
    private static volatile String predicate = "contains";

    private MethodCallInterceptor() {
    }

    /** Arms the interceptor for one class/method pair and resets state. */
    public static void interceptor(Class<?> targetClass, String methodName, Object[] expected) {
        triggered = false;
        conditionMet = false;
        expectedArgs = expected == null ? new Object[0] : expected.clone();
        ByteBuddyAgent.install();
        new AgentBuilder.Default()
                .disableClassFormatChanges()
                .with(AgentBuilder.RedefinitionStrategy.RETRANSFORMATION)
                .type(ElementMatchers.is(targetClass))
                .transform((builder, type, loader, module, domain) -> builder
                        .visit(Advice.to(EnterAdvice.class)
                                .on(ElementMatchers.named(methodName))))
                .installOnByteBuddyAgent();
    }

    /** Optional: switch the comparison predicate (contains|equals|matches). */
    public static void predicate(String name) {
        predicate = name;
    }

    public static boolean isTriggered() {
        return triggered;
    }

    public static boolean isConditionMet() {
        return conditionMet;
    }

    /** Called from instrumented code; public visibility is required. */
    public static void record(Object[] actual) {
        triggered = true;
        if (matches(actual)) {
            conditionMet = true;
        }
    }

    private static boolean matches(Object[] actual) {
        if (expectedArgs.length == 0) {
            return true;
        }
        if (actual == null) {
            return false;
        }
        for (Object expected : expectedArgs) {
            String want = String.valueOf(expected);
            boolean found = false;
            for (Object arg : actual) {
                String got = String.valueOf(arg);
                if ("equals".equals(predicate) ? got.equals(want)
                        : "matches".equals(predicate) ? Pattern.compile(want).matcher(got).find()
                        : got.contains(want)) {
                    found = true;
                    break;
                }
            }
            if (!found) {
                return false;
            }
        }
        return true;
    }

    public static class EnterAdvice {
        @Advice.OnMethodEnter
        static void enter(@Advice.AllArguments Object[] args) {
            MethodCallInterceptor.record(args);
        }
    }
}
'''

FEW_SHOT_EXAMPLES = (
    '''\
@Test
public void testParseUntrustedXml() {
    String payload = "<map><entry><jdk.nashorn.internal.objects.NativeString></jdk.nashorn.internal.objects.NativeString></entry></map>";
    MethodCallInterceptor.interceptor(com.example.xml.XmlCodec.class, "decode", new Object[]{payload});
    try {
        new DocumentImporter().importDocument(payload);
        fail("Expected Exception");
    } catch (Throwable expected) {
    }
    assertTrue(MethodCallInterceptor.isTriggered());
    assertTrue(MethodCallInterceptor.isConditionMet());
}''',
    '''\
@Test
public void testDeepJsonNesting() {
    String json = "{\\"a\\":".repeat(10000) + "1" + "}".repeat(10000);
    MethodCallInterceptor.interceptor(com.example.json.JsonReader.class, "read", new Object[]{json});
    try {
        new SettingsLoader().load(json);
    } catch (Throwable expected) {
    }
    assertTrue(MethodCallInterceptor.isTriggered());
    assertTrue(MethodCallInterceptor.isConditionMet());
}''',
    '''\
@Test
public void testTraversalPathNormalization() {
    String path = "//../secret/config";
    MethodCallInterceptor.interceptor(com.example.io.PathTool.class, "normalize", new Object[]{path});
    try {
        new ArchiveBrowser().open(path, "UTF-8");
    } catch (Throwable expected) {
    }
    assertTrue(MethodCallInterceptor.isTriggered());
    assertTrue(MethodCallInterceptor.isConditionMet());
}''',
    '''\
@Test
public void testMaliciousArchiveEntry() {
    String entryName = "../../evil.sh";
    MethodCallInterceptor.interceptor(com.example.zip.EntryReader.class, "nextEntry", new Object[]{entryName});
    try {
        new BundleExtractor().extract(entryName);
        fail("Expected Exception");
    } catch (Throwable expected) {
    }
    assertTrue(MethodCallInterceptor.isTriggered());
    assertTrue(MethodCallInterceptor.isConditionMet());
}''',
    '''\
@Test
public void testTemplateInjection() {
    String template = "${script:javascript:java.lang.Runtime.getRuntime()}";
    MethodCallInterceptor.interceptor(com.example.text.Interpolator.class, "replace", new Object[]{template});
    try {
        new MessageRenderer().render(template);
    } catch (Throwable expected) {
    }
    assertTrue(MethodCallInterceptor.isTriggered());
    assertTrue(MethodCallInterceptor.isConditionMet());
}''',
)
