package fx.change;

import org.apache.commons.text.StringSubstitutor;

public class Templater {
    public String render(String template) {
        String framed = "<header>" + template;
        StringSubstitutor sub = new StringSubstitutor();
        return sub.replace(framed);
    }
}
